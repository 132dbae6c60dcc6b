//! Preconditioned conjugate gradients for `(λ − 𝕃_N) u = f`.
//!
//! In one dimension the preconditioner is the exact cyclic tridiagonal
//! solve of the operator itself. In higher dimension it is the
//! constant-coefficient operator with the same `W`, inverted by fast
//! diagonalization (one dense eigendecomposition per axis).

use nalgebra::{DMatrix, SymmetricEigen};

use super::LatticeOperator;
use crate::lattice::dot;
use crate::{Error, Lattice, LatticeFunction, Result};

/// Target relative residual of the iteration.
const RELATIVE_TOL: f64 = 1e-12;
/// A solution is accepted if its true relative residual stays below this.
const ACCEPT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖λu − 𝕃u − f‖₂ / ‖f‖₂`, recomputed from the returned solution.
    pub relative_residual: f64,
}

pub fn solve_resolvent(op: &LatticeOperator, lambda: f64, f: &LatticeFunction) -> Result<LatticeFunction> {
    solve_resolvent_with_report(op, lambda, f).map(|(u, _)| u)
}

pub fn solve_resolvent_with_report(
    op: &LatticeOperator,
    lambda: f64,
    f: &LatticeFunction,
) -> Result<(LatticeFunction, SolveReport)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("λ must be positive, got {lambda}")));
    }
    op.check(f)?;
    let pre = Preconditioner::new(op, lambda);
    let (u, report) = pcg(op, lambda, f.values(), &pre)?;
    Ok((LatticeFunction::from_values(op.lattice(), u)?, report))
}

pub(crate) fn resolvent_apply(op: &LatticeOperator, lambda: f64, u: &[f64], out: &mut [f64]) {
    op.apply_into(u, out);
    for (o, &v) in out.iter_mut().zip(u) {
        *o = lambda * v - *o;
    }
}

pub(crate) fn pcg(
    op: &LatticeOperator,
    lambda: f64,
    f: &[f64],
    pre: &Preconditioner,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = f.len();
    let f_norm = dot(f, f).sqrt();
    let mut u = vec![0.0; n];
    if f_norm == 0.0 {
        return Ok((
            u,
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let max_iter = 500 + 20 * (n as f64).sqrt() as usize;
    let mut r = f.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        resolvent_apply(op, lambda, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= RELATIVE_TOL * f_norm {
            break;
        }
        pre.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // The recurrence residual can drift below the attainable floor, so the
    // reported residual is recomputed from scratch.
    resolvent_apply(op, lambda, &u, &mut ap);
    let true_res = ap.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / f_norm;
    if !(true_res <= ACCEPT_TOL) {
        return Err(Error::NoConvergence {
            iterations,
            residual: true_res,
        });
    }
    Ok((
        u,
        SolveReport {
            iterations,
            relative_residual: true_res,
        },
    ))
}

pub(crate) enum Preconditioner {
    /// Exact solve of a one-dimensional cyclic tridiagonal system.
    Cyclic(CyclicTridiagonal),
    FastDiagonal(FastDiagonal),
}

impl Preconditioner {
    pub(crate) fn new(op: &LatticeOperator, lambda: f64) -> Self {
        if op.lattice().dim() == 1 {
            Preconditioner::Cyclic(CyclicTridiagonal::new(op, lambda))
        } else {
            Preconditioner::FastDiagonal(FastDiagonal::new(op, lambda))
        }
    }

    pub(crate) fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Cyclic(c) => c.solve(r, z),
            Preconditioner::FastDiagonal(f) => f.solve(r, z),
        }
    }
}

/// `λ − 𝕃` on a ring: `(λ + κ_{i−1} + κ_i) u_i − κ_{i−1} u_{i−1} − κ_i u_{i+1}`.
pub(crate) struct CyclicTridiagonal {
    lambda: f64,
    kappa: Vec<f64>,
}

impl CyclicTridiagonal {
    fn new(op: &LatticeOperator, lambda: f64) -> Self {
        CyclicTridiagonal {
            lambda,
            kappa: op.conductances().to_vec(),
        }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        let k = &self.kappa;
        match n {
            1 => out[0] = rhs[0] / self.lambda,
            2 => {
                // Both bonds join the same pair of sites.
                let c = k[0] + k[1];
                let (a, b) = (self.lambda + c, -c);
                let det = a * a - b * b;
                out[0] = (a * rhs[0] - b * rhs[1]) / det;
                out[1] = (a * rhs[1] - b * rhs[0]) / det;
            }
            _ => self.solve_ring(rhs, out),
        }
    }

    /// Sherman-Morrison reduction of the periodic system to two
    /// non-periodic tridiagonal solves.
    fn solve_ring(&self, rhs: &[f64], out: &mut [f64]) {
        let n = rhs.len();
        let k = &self.kappa;
        let diag: Vec<f64> = (0..n).map(|i| self.lambda + k[i] + k[(i + n - 1) % n]).collect();
        // Corner entries: A[0][n-1] = A[n-1][0] = -κ_{n-1}.
        let corner = -k[n - 1];
        let gamma = -diag[0];
        let mut b = diag.clone();
        b[0] -= gamma;
        b[n - 1] -= corner * corner / gamma;
        // Off-diagonal A[i][i+1] = -κ_i.
        let upper: Vec<f64> = (0..n - 1).map(|i| -k[i]).collect();
        let x = thomas(&upper, &b, rhs);
        let mut e = vec![0.0; n];
        e[0] = gamma;
        e[n - 1] = corner;
        let zz = thomas(&upper, &b, &e);
        let factor = (x[0] + corner * x[n - 1] / gamma) / (1.0 + zz[0] + corner * zz[n - 1] / gamma);
        for i in 0..n {
            out[i] = x[i] - factor * zz[i];
        }
    }
}

/// Symmetric tridiagonal solve with off-diagonal `off` and diagonal `diag`.
fn thomas(off: &[f64], diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut denom = diag[0];
    x[0] = rhs[0] / denom;
    for i in 1..n {
        c[i - 1] = off[i - 1] / denom;
        denom = diag[i] - off[i - 1] * c[i - 1];
        x[i] = (rhs[i] - off[i - 1] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Inverse of `λ + Σ_j ā_j T_j` where `T_j` is the unit-coefficient
/// one-dimensional operator `−∂_x∂_{W_j}` acting along axis `j`.
pub(crate) struct FastDiagonal {
    lattice: Lattice,
    /// Row-major `N×N` eigenvector matrices per axis.
    vectors: Vec<Vec<f64>>,
    /// `1 / (λ + Σ_j ā_j μ_{j,i_j})` laid out like the lattice.
    inverse_spectrum: Vec<f64>,
}

impl FastDiagonal {
    fn new(op: &LatticeOperator, lambda: f64) -> Self {
        let lattice = op.lattice();
        let n = lattice.size();
        let mut vectors = Vec::new();
        let mut spectra = Vec::new();
        for j in 0..lattice.dim() {
            let mean_a = op.field().axis_values(j).iter().sum::<f64>() / lattice.num_sites() as f64;
            let m = ring_matrix(op.increments(j), n);
            let eig = SymmetricEigen::new(m);
            spectra.push(
                eig.eigenvalues
                    .iter()
                    .map(|mu| mean_a * mu.max(0.0))
                    .collect::<Vec<_>>(),
            );
            let mut q = vec![0.0; n * n];
            for r in 0..n {
                for c in 0..n {
                    q[r * n + c] = eig.eigenvectors[(r, c)];
                }
            }
            vectors.push(q);
        }
        let inverse_spectrum = (0..lattice.num_sites())
            .map(|s| {
                let total: f64 = (0..lattice.dim()).map(|j| spectra[j][lattice.coord(s, j)]).sum();
                1.0 / (lambda + total)
            })
            .collect();
        FastDiagonal {
            lattice,
            vectors,
            inverse_spectrum,
        }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(rhs);
        for j in 0..self.lattice.dim() {
            apply_along_axis(&self.lattice, j, &self.vectors[j], true, out);
        }
        for (o, s) in out.iter_mut().zip(&self.inverse_spectrum) {
            *o *= s;
        }
        for j in 0..self.lattice.dim() {
            apply_along_axis(&self.lattice, j, &self.vectors[j], false, out);
        }
    }
}

/// Dense `−𝕃` of a unit-coefficient ring with increments `inc`.
pub(crate) fn ring_matrix(inc: &[f64], n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        let k = nf / inc[c];
        let e = (c + 1) % n;
        m[(c, c)] += k;
        m[(e, e)] += k;
        m[(c, e)] -= k;
        m[(e, c)] -= k;
    }
    m
}

/// Multiplies every fiber along `axis` by `Q` (or `Qᵀ` when `transpose`).
pub(crate) fn apply_along_axis(lattice: &Lattice, axis: usize, q: &[f64], transpose: bool, data: &mut [f64]) {
    let n = lattice.size();
    let stride = lattice.stride(axis);
    let outer = lattice.num_sites() / (stride * n);
    let mut fiber = vec![0.0; n];
    let mut result = vec![0.0; n];
    for o in 0..outer {
        for i in 0..stride {
            let base = o * stride * n + i;
            for c in 0..n {
                fiber[c] = data[base + c * stride];
            }
            for (r, res) in result.iter_mut().enumerate() {
                *res = if transpose {
                    (0..n).map(|c| q[c * n + r] * fiber[c]).sum()
                } else {
                    (0..n).map(|c| q[r * n + c] * fiber[c]).sum()
                };
            }
            for c in 0..n {
                data[base + c * stride] = result[c];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::{AxisProfile, WFunction};
    use std::f64::consts::PI;

    fn check_residual(op: &LatticeOperator, lambda: f64, f: &LatticeFunction, u: &LatticeFunction) {
        let res = u.map(|v| lambda * v).sub(&op.apply(u)).sub(f);
        assert!(
            res.sup_norm() <= 1e-9 * f.sup_norm().max(1e-300),
            "residual {}",
            res.sup_norm()
        );
    }

    #[test]
    fn constants_scale_by_one_over_lambda() {
        let field = sample_field(&EnvironmentSpec::iid(vec![1.0, 3.0], vec![0.5, 0.5], 3.0, 2), 2, 12).unwrap();
        let op = assemble(&WFunction::identity(2), &field).unwrap();
        let f = LatticeFunction::constant(op.lattice(), 2.0);
        let u = solve_resolvent(&op, 4.0, &f).unwrap();
        assert!(u.values().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn zero_rhs_and_invalid_lambda() {
        let field = sample_field(&EnvironmentSpec::constant(1.0), 1, 8).unwrap();
        let op = assemble(&WFunction::identity(1), &field).unwrap();
        let zero = LatticeFunction::zeros(op.lattice());
        assert_eq!(solve_resolvent(&op, 1.0, &zero).unwrap(), zero);
        assert!(solve_resolvent(&op, 0.0, &zero).is_err());
        assert!(solve_resolvent(&op, -1.0, &zero).is_err());
    }

    #[test]
    fn fourier_mode_matches_circulant_diagonalization() {
        for n in [3usize, 16, 64] {
            let field = sample_field(&EnvironmentSpec::constant(1.0), 1, n.max(2)).unwrap();
            let op = assemble(&WFunction::identity(1), &field).unwrap();
            let f = LatticeFunction::from_fn(op.lattice(), |x| (2.0 * PI * x[0]).cos());
            let lambda = 1.5;
            let u = solve_resolvent(&op, lambda, &f).unwrap();
            let nf = n as f64;
            let mode = lambda + 4.0 * nf * nf * (PI / nf).sin().powi(2);
            for (uv, fv) in u.values().iter().zip(f.values()) {
                assert!((uv - fv / mode).abs() < 1e-12);
            }
            check_residual(&op, lambda, &f, &u);
        }
    }

    #[test]
    fn random_environment_with_membranes_in_two_dimensions() {
        let wf = WFunction::new(vec![
            AxisProfile::new(1.0, vec![(0.5, 3.0)]).unwrap(),
            AxisProfile::new(2.0, vec![]).unwrap(),
        ])
        .unwrap();
        let field = sample_field(&EnvironmentSpec::iid(vec![0.5, 2.0], vec![0.5, 0.5], 2.0, 11), 2, 24).unwrap();
        let op = assemble(&wf, &field).unwrap();
        let f = LatticeFunction::from_fn(op.lattice(), |x| (2.0 * PI * x[0]).sin() * (1.0 + x[1]));
        let (u, report) = solve_resolvent_with_report(&op, 0.7, &f).unwrap();
        assert!(report.relative_residual < 1e-9);
        check_residual(&op, 0.7, &f, &u);
    }

    #[test]
    fn tiny_rings() {
        for n in [2usize, 3] {
            let field = sample_field(&EnvironmentSpec::periodic(vec![2], vec![1.0, 2.0], 2.0), 1, n).unwrap();
            let op = assemble(&WFunction::identity(1), &field).unwrap();
            let f = LatticeFunction::from_fn(op.lattice(), |x| 1.0 + x[0]);
            let u = solve_resolvent(&op, 0.3, &f).unwrap();
            check_residual(&op, 0.3, &f, &u);
        }
    }
}
