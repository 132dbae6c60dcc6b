//! Smallest eigenpairs of `−𝕃_N` and the discrete ladder norms.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use super::solver::{pcg, ring_matrix, Preconditioner};
use super::{assemble, LatticeOperator};
use crate::env::EnvironmentField;
use crate::lattice::dot;
use crate::rng::{chacha, derive_seed, stream};
use crate::wfunc::WFunction;
use crate::{Error, Lattice, LatticeFunction, Result};

/// Largest lattice handled by a dense eigensolve.
const DENSE_LIMIT: usize = 1024;
const RESIDUAL_TOL: f64 = 1e-8;

/// Ordered eigenpairs `0 = α_1 ≤ α_2 ≤ …` of `−𝕃_N`, with eigenvectors
/// orthonormal under `⟨f, g⟩ = N^{-d} Σ f g`.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    lattice: Lattice,
    alphas: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl EigenBasis {
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `α_k` for 0-based `k`.
    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k]
    }

    /// `λ_k = 1 + α_k`.
    pub fn lambda(&self, k: usize) -> f64 {
        1.0 + self.alphas[k]
    }

    pub fn vector(&self, k: usize) -> LatticeFunction {
        LatticeFunction::from_values(self.lattice, self.vectors[k].clone()).expect("finite")
    }

    /// `⟨f, φ_k⟩` for every basis vector.
    pub fn coefficients(&self, f: &LatticeFunction) -> Vec<f64> {
        let w = self.lattice.cell_volume();
        self.vectors.iter().map(|v| dot(v, f.values()) * w).collect()
    }

    /// Keeps the first `k` pairs.
    pub fn truncated(&self, k: usize) -> EigenBasis {
        let k = k.min(self.len());
        EigenBasis {
            lattice: self.lattice,
            alphas: self.alphas[..k].to_vec(),
            vectors: self.vectors[..k].to_vec(),
        }
    }
}

/// The `k` smallest eigenpairs of `−𝕃_N`.
///
/// Small lattices use a dense symmetric solve. Constant-per-axis
/// environments in `d > 1` tensorize one-dimensional bases. Everything else
/// goes through block inverse iteration with Rayleigh-Ritz.
pub fn eigendecompose(op: &LatticeOperator, k: usize) -> Result<EigenBasis> {
    let lattice = op.lattice();
    let sites = lattice.num_sites();
    if k == 0 || k > sites {
        return Err(Error::param("K", format!("need 1 ≤ K ≤ N^d = {sites}, got {k}")));
    }
    let mut pairs = if sites <= DENSE_LIMIT {
        dense_pairs(op, k)
    } else if lattice.dim() > 1 && op.field().is_constant_per_axis() {
        tensor_pairs(op, k)
    } else {
        subspace_pairs(op, k)?
    };
    finalize(&lattice, &mut pairs);
    let basis = EigenBasis {
        lattice,
        alphas: pairs.iter().map(|p| p.0).collect(),
        vectors: pairs.into_iter().map(|p| p.1).collect(),
    };
    verify(op, &basis)?;
    Ok(basis)
}

type Pair = (f64, Vec<f64>);

fn dense_matrix(op: &LatticeOperator) -> DMatrix<f64> {
    let n = op.lattice().num_sites();
    let m = op.matrix();
    let mut dense = DMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in m.row(r) {
            dense[(r, c)] = -v;
        }
    }
    dense
}

/// Eigenpairs of a dense symmetric matrix, ascending, vectors scaled to
/// unit norm under the normalized counting measure.
fn sorted_pairs(m: DMatrix<f64>, k: usize) -> Vec<Pair> {
    let n = m.nrows();
    let scale = (n as f64).sqrt();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let v = eig.eigenvectors.column(i).iter().map(|x| x * scale).collect();
            (eig.eigenvalues[i], v)
        })
        .collect()
}

fn dense_pairs(op: &LatticeOperator, k: usize) -> Vec<Pair> {
    sorted_pairs(dense_matrix(op), k)
}

fn tensor_pairs(op: &LatticeOperator, k: usize) -> Vec<Pair> {
    let lattice = op.lattice();
    let n = lattice.size();
    let d = lattice.dim();
    let keep = k.min(n);
    let axes: Vec<Vec<Pair>> = (0..d)
        .map(|j| {
            let a = op.field().get(j, 0);
            sorted_pairs(ring_matrix(op.increments(j), n) * a, keep)
        })
        .collect();
    // Enumerate index tuples in lexicographic order, then stable-sort by the
    // summed eigenvalue.
    let mut tuples: Vec<(f64, Vec<usize>)> = Vec::new();
    let total = keep.pow(d as u32);
    for flat in 0..total {
        let mut idx = Vec::with_capacity(d);
        let mut rest = flat;
        for _ in 0..d {
            idx.push(rest % keep);
            rest /= keep;
        }
        idx.reverse();
        let alpha: f64 = idx.iter().enumerate().map(|(j, &i)| axes[j][i].0).sum();
        tuples.push((alpha, idx));
    }
    tuples.sort_by(|a, b| a.0.total_cmp(&b.0));
    tuples
        .into_iter()
        .take(k)
        .map(|(alpha, idx)| {
            let v = (0..lattice.num_sites())
                .map(|s| (0..d).map(|j| axes[j][idx[j]].1[lattice.coord(s, j)]).product())
                .collect();
            (alpha, v)
        })
        .collect()
}

fn orthonormalize(block: &mut [Vec<f64>]) {
    for i in 0..block.len() {
        for _ in 0..2 {
            for j in 0..i {
                let (head, tail) = block.split_at_mut(i);
                let proj = dot(&head[j], &tail[0]);
                for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * y;
                }
            }
        }
        let norm = dot(&block[i], &block[i]).sqrt();
        block[i].iter_mut().for_each(|x| *x /= norm);
    }
}

fn subspace_pairs(op: &LatticeOperator, k: usize) -> Result<Vec<Pair>> {
    let lattice = op.lattice();
    let sites = lattice.num_sites();
    let p = (k + (k / 2).max(6)).min(sites);
    let shift = 1.0;
    let pre = Preconditioner::new(op, shift);
    let mut rng = chacha(derive_seed(k as u64, stream::EIGEN, sites as u64));
    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..sites).map(|_| rng.random::<f64>() - 0.5).collect())
        .collect();
    orthonormalize(&mut block);
    let mut lx = vec![0.0; sites];
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        for v in block.iter_mut() {
            let (y, _) = pcg(op, shift, v, &pre)?;
            *v = y;
        }
        orthonormalize(&mut block);
        let images: Vec<Vec<f64>> = block
            .iter()
            .map(|v| {
                op.apply_into(v, &mut lx);
                lx.iter().map(|x| -x).collect()
            })
            .collect();
        let h = DMatrix::from_fn(p, p, |i, j| {
            0.5 * (dot(&block[i], &images[j]) + dot(&block[j], &images[i]))
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let rotate = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
            let mut out = vec![0.0; sites];
            for (i, v) in src.iter().enumerate() {
                let c = eig.eigenvectors[(i, col)];
                out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
            }
            out
        };
        let ritz: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&block, c)).collect();
        let ritz_images: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&images, c)).collect();
        worst = 0.0;
        for i in 0..k {
            let theta = eig.eigenvalues[order[i]];
            let res: f64 = ritz_images[i]
                .iter()
                .zip(&ritz[i])
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(res / theta.abs().max(1.0));
        }
        block = ritz;
        if worst < 0.1 * RESIDUAL_TOL {
            let scale = (sites as f64).sqrt();
            return Ok(order
                .iter()
                .take(k)
                .zip(block)
                .map(|(&c, v)| (eig.eigenvalues[c], v.into_iter().map(|x| x * scale).collect()))
                .collect());
        }
    }
    Err(Error::EigenConvergence {
        index: k - 1,
        residual: worst,
    })
}

/// Pins `α_1 = 0` with the constant eigenvector and fixes signs so the
/// first non-negligible component is positive.
fn finalize(lattice: &Lattice, pairs: &mut [Pair]) {
    let scale = pairs.last().map_or(1.0, |p| p.0.abs()).max(1.0);
    if let Some(first) = pairs.first_mut() {
        if first.0.abs() < 1e-9 * scale {
            first.0 = 0.0;
            first.1 = vec![1.0; lattice.num_sites()];
        }
    }
    for (alpha, v) in pairs.iter_mut() {
        if *alpha < 0.0 && *alpha > -1e-9 * scale {
            *alpha = 0.0;
        }
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(&lead) = v.iter().find(|x| x.abs() > 1e-8 * peak) {
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

fn verify(op: &LatticeOperator, basis: &EigenBasis) -> Result<()> {
    let sites = op.lattice().num_sites();
    let mut lx = vec![0.0; sites];
    for k in 0..basis.len() {
        let v = &basis.vectors[k];
        op.apply_into(v, &mut lx);
        let alpha = basis.alphas[k];
        let res = (lx.iter().zip(v).map(|(l, x)| (-l - alpha * x).powi(2)).sum::<f64>() / sites as f64).sqrt();
        if !(res <= RESIDUAL_TOL * alpha.max(1.0)) {
            return Err(Error::EigenConvergence {
                index: k,
                residual: res,
            });
        }
    }
    Ok(())
}

/// Discrete ladder norm `‖f‖_n² = Σ_k ⟨f, φ_k⟩² (λ_k k)^{2n}` with 1-based `k`.
///
/// The basis must capture at least `1 − 1e−10` of `‖f‖²`.
pub fn sobolev_norm(f: &LatticeFunction, n: u32, basis: &EigenBasis) -> Result<f64> {
    if f.lattice() != basis.lattice {
        return Err(Error::DimensionMismatch(
            "function and basis live on different lattices".into(),
        ));
    }
    let total = f.norm_sq();
    let coeffs = basis.coefficients(f);
    let captured: f64 = coeffs.iter().map(|c| c * c).sum();
    if total > 0.0 && captured < (1.0 - 1e-10) * total {
        return Err(Error::InsufficientBasis {
            captured: captured / total,
        });
    }
    // Ladder weights grow like (λ_k k)^{2n}, so coefficients at rounding
    // level are dropped rather than amplified.
    let floor = 1e-13 * total.sqrt();
    let sum: f64 = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.abs() > floor)
        .map(|(i, c)| c * c * (basis.lambda(i) * (i + 1) as f64).powi(2 * n as i32))
        .sum();
    Ok(sum.sqrt())
}

/// Ladder norm in the basis of `∇∇_W` (`a ≡ 1`) on the lattice of `f`.
pub fn w_ladder_norm(f: &LatticeFunction, n: u32, wf: &WFunction) -> Result<f64> {
    let lattice = f.lattice();
    let field = EnvironmentField::constant_per_axis(lattice, &vec![1.0; lattice.dim()])?;
    let op = assemble(wf, &field)?;
    sobolev_norm(f, n, &eigendecompose(&op, lattice.num_sites())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::{AxisProfile, WFunction};
    use std::f64::consts::PI;

    fn flat(d: usize, n: usize) -> LatticeOperator {
        let field = sample_field(&EnvironmentSpec::constant(1.0), d, n).unwrap();
        assemble(&WFunction::identity(d), &field).unwrap()
    }

    fn assert_orthonormal(b: &EigenBasis) {
        for i in 0..b.len() {
            for j in 0..b.len() {
                let ip = b.vector(i).inner(&b.vector(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "<{i},{j}> = {ip}");
            }
        }
    }

    #[test]
    fn flat_ring_closed_form() {
        let n = 32;
        let b = eigendecompose(&flat(1, n), 15).unwrap();
        assert_eq!(b.alpha(0), 0.0);
        assert!(b.vector(0).values().iter().all(|&v| v == 1.0));
        for k in 0..15usize {
            let m = k.div_ceil(2) as f64;
            let expect = 4.0 * (n * n) as f64 * (PI * m / n as f64).sin().powi(2);
            assert!((b.alpha(k) - expect).abs() <= 1e-9 * expect.max(1.0));
        }
        assert_orthonormal(&b);
    }

    #[test]
    fn tensor_basis_sums_axis_eigenvalues() {
        // 40² > DENSE_LIMIT forces the tensor route.
        let n = 40;
        let op2 = flat(2, n);
        let b2 = eigendecompose(&op2, 9).unwrap();
        let b1 = eigendecompose(&flat(1, n), 5).unwrap();
        let mut sums: Vec<f64> = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                sums.push(b1.alpha(i) + b1.alpha(j));
            }
        }
        sums.sort_by(f64::total_cmp);
        for (k, s) in sums.iter().take(9).enumerate() {
            assert!((b2.alpha(k) - s).abs() < 1e-8 * s.max(1.0));
        }
        assert_orthonormal(&b2);
    }

    #[test]
    fn subspace_iteration_agrees_with_dense() {
        let spec = EnvironmentSpec::iid(vec![0.5, 2.0], vec![0.5, 0.5], 2.0, 5);
        let wf = WFunction::new(vec![
            AxisProfile::identity(),
            AxisProfile::new(1.0, vec![(0.3, 0.5)]).unwrap(),
        ])
        .unwrap();
        let field = sample_field(&spec, 2, 33).unwrap();
        let op = assemble(&wf, &field).unwrap();
        let iterative = eigendecompose(&op, 6).unwrap();
        let dense = dense_pairs(&op, 6);
        for (k, (alpha, _)) in dense.iter().enumerate() {
            assert!((iterative.alpha(k) - alpha).abs() < 1e-7 * alpha.max(1.0));
        }
        assert_orthonormal(&iterative);
    }

    #[test]
    fn spectrum_nonnegative_with_membrane() {
        let wf = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.5, 10.0)]).unwrap()]).unwrap();
        let field = sample_field(&EnvironmentSpec::periodic(vec![2], vec![1.0, 3.0], 3.0), 1, 64).unwrap();
        let b = eigendecompose(&assemble(&wf, &field).unwrap(), 64).unwrap();
        assert_eq!(b.alpha(0), 0.0);
        assert!(b.alphas().windows(2).all(|w| w[0] <= w[1]));
        assert_orthonormal(&b);
    }

    #[test]
    fn ladder_norms() {
        let op = flat(1, 16);
        let b = eigendecompose(&op, 16).unwrap();
        let c = LatticeFunction::constant(op.lattice(), -2.5);
        for n in 0..4 {
            let v = sobolev_norm(&c, n, &b).unwrap();
            assert!((v - 2.5).abs() < 1e-12, "n = {n}: {v}");
        }
        let f = LatticeFunction::from_fn(op.lattice(), |x| (x[0] * 13.0).sin() + x[0]);
        assert!((sobolev_norm(&f, 0, &b).unwrap() - f.norm()).abs() < 1e-10);
        let mut last = 0.0;
        for n in 0..5 {
            let v = sobolev_norm(&f, n, &b).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert!(matches!(
            sobolev_norm(&f, 1, &b.truncated(4)),
            Err(Error::InsufficientBasis { .. })
        ));
    }

    #[test]
    fn w_ladder_norm_ignores_the_environment() {
        let wf = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.5, 0.7)]).unwrap()]).unwrap();
        let spec = EnvironmentSpec::iid(vec![0.5, 2.0], vec![0.5, 0.5], 2.0, 1);
        let rough = assemble(&wf, &sample_field(&spec, 1, 32).unwrap()).unwrap();
        let smooth = assemble(&wf, &sample_field(&EnvironmentSpec::constant(1.0), 1, 32).unwrap()).unwrap();
        let f = LatticeFunction::from_fn(rough.lattice(), |x| (2.0 * PI * x[0]).cos());
        let expected = sobolev_norm(&f, 2, &eigendecompose(&smooth, 32).unwrap()).unwrap();
        assert!((w_ladder_norm(&f, 2, &wf).unwrap() - expected).abs() < 1e-9 * expected);
        let other = sobolev_norm(&f, 2, &eigendecompose(&rough, 32).unwrap()).unwrap();
        assert!((other - expected).abs() > 1e-3 * expected);
    }

    #[test]
    fn invalid_count() {
        assert!(eigendecompose(&flat(1, 8), 0).is_err());
        assert!(eigendecompose(&flat(1, 8), 9).is_err());
    }
}
