//! Numerical homogenization by solution matching.
//!
//! For each lattice size the random-coefficient resolvent problem
//! `λu_N − ∇ᴺAᴺ∇ᴺ_W u_N = f` is solved for a small family of right-hand
//! sides, and the diagonal constant matrix `A` whose solutions are closest
//! in `ℓ²` is found by Gauss-Newton.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{assemble, solve_resolvent, LatticeOperator};
use crate::env::{sample_field, EnvironmentSpec};
use crate::fluctuations::TestFunction;
use crate::wfunc::WFunction;
use crate::{Error, Lattice, LatticeFunction, Result};

const MAX_CONDITION: f64 = 1e12;

/// Diagonal effective matrix `A = diag(a_11, …, a_dd)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogenizedMatrix {
    diag: Vec<f64>,
}

impl HomogenizedMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || diag.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::param("A", format!("diagonal must be positive, got {diag:?}")));
        }
        Ok(HomogenizedMatrix { diag })
    }

    pub fn scalar(d: usize, value: f64) -> Self {
        HomogenizedMatrix { diag: vec![value; d] }
    }

    pub fn identity(d: usize) -> Self {
        Self::scalar(d, 1.0)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn get(&self, j: usize) -> f64 {
        self.diag[j]
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }
}

#[derive(Clone, Debug)]
pub struct HomogenizationFit {
    pub n: usize,
    pub matrix: HomogenizedMatrix,
    /// `(Σ_i ‖u_A − u_N‖²)^{1/2} / (Σ_i ‖u_N‖²)^{1/2}` at the optimum.
    pub relative_residual: f64,
    /// Condition number of the Gauss-Newton normal matrix.
    pub condition: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct HomogenizationReport {
    /// One fit per lattice size, in the order given.
    pub fits: Vec<HomogenizationFit>,
    /// The fit at the largest lattice size.
    pub matrix: HomogenizedMatrix,
}

/// Fits the constant diagonal matrix reproducing the solutions of `op`.
pub fn fit_homogenized(op: &LatticeOperator, lambda: f64, rhs: &[LatticeFunction]) -> Result<HomogenizationFit> {
    let lattice = op.lattice();
    let d = lattice.dim();
    if rhs.is_empty() {
        return Err(Error::param("rhs", "at least one right-hand side is required"));
    }
    let targets = rhs
        .iter()
        .map(|f| solve_resolvent(op, lambda, f))
        .collect::<Result<Vec<_>>>()?;
    let target_norm: f64 = targets.iter().map(|u| u.norm_sq()).sum::<f64>().sqrt();
    let mut a: Vec<f64> = (0..d).map(|j| op.field().harmonic_mean(j)).collect();
    let mut condition = 1.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..60 {
        iterations += 1;
        let op_a = op.with_coefficients(&a)?;
        let mut jtj = DMatrix::<f64>::zeros(d, d);
        let mut jtr = DVector::<f64>::zeros(d);
        let mut res_sq = 0.0;
        for (f, target) in rhs.iter().zip(&targets) {
            let u = solve_resolvent(&op_a, lambda, f)?;
            let r = u.sub(target);
            res_sq += r.norm_sq();
            let cols = (0..d)
                .map(|j| {
                    let unit = op_a.apply_axis(j, &u).map(|v| v / a[j]);
                    solve_resolvent(&op_a, lambda, &unit)
                })
                .collect::<Result<Vec<_>>>()?;
            for i in 0..d {
                jtr[i] += cols[i].inner(&r);
                for j in 0..d {
                    jtj[(i, j)] += cols[i].inner(&cols[j]);
                }
            }
        }
        residual = if target_norm > 0.0 {
            res_sq.sqrt() / target_norm
        } else {
            0.0
        };
        let eig = SymmetricEigen::new(jtj.clone());
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        let step = jtj
            .cholesky()
            .ok_or(Error::IllConditioned { condition })?
            .solve(&(-jtr));
        let mut scale = 1.0;
        while (0..d).any(|j| a[j] + scale * step[j] <= 0.0) {
            scale *= 0.5;
        }
        let mut largest = 0.0f64;
        for j in 0..d {
            a[j] += scale * step[j];
            largest = largest.max((scale * step[j]).abs() / a[j]);
        }
        if largest < 1e-12 {
            break;
        }
    }
    Ok(HomogenizationFit {
        n: lattice.size(),
        matrix: HomogenizedMatrix::new(a)?,
        relative_residual: residual,
        condition,
        iterations,
    })
}

/// `cos 2πx_j` and `sin 2πx_j` along every axis.
pub fn default_rhs_family(d: usize) -> Vec<TestFunction> {
    (0..d)
        .flat_map(|j| [TestFunction::cosine(j, 1, 1.0), TestFunction::sine(j, 1, 1.0)])
        .collect()
}

/// Fits `A` at every lattice size in `n_list` and reports the trend.
pub fn homogenize(
    wf: &WFunction,
    spec: &EnvironmentSpec,
    lambda: f64,
    rhs: &[TestFunction],
    n_list: &[usize],
) -> Result<HomogenizationReport> {
    check_n_list(n_list)?;
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", format!("λ must be positive, got {lambda}")));
    }
    let d = wf.dim();
    let fits = n_list
        .iter()
        .map(|&n| {
            let field = sample_field(spec, d, n)?;
            let op = assemble(wf, &field)?;
            let lattice = op.lattice();
            let fs: Vec<LatticeFunction> = rhs.iter().map(|g| g.restrict(lattice)).collect();
            fit_homogenized(&op, lambda, &fs)
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = fits.last().expect("non-empty list").matrix.clone();
    Ok(HomogenizationReport { fits, matrix })
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("N-list", "lattice sizes must be non-empty and increasing"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyRow {
    pub n: usize,
    /// `N^{-d} Σ u_N²`.
    pub l2_n: f64,
    /// Same for the constant-coefficient solution `u_0`.
    pub l2_0: f64,
    /// `N^{-(d-1)} Σ_j Σ_x a_j (∂ᴺ_{W_j} u_N)² ΔW_j`.
    pub energy_n: f64,
    pub energy_0: f64,
    pub l2_gap: f64,
    pub energy_gap: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub matrix: HomogenizedMatrix,
    pub fits: Vec<HomogenizationFit>,
    pub rows: Vec<EnergyRow>,
}

/// Energies of `u_N` against those of `u_0`, the solution of
/// `λu_0 − ∇A∇_W u_0 = f` on the same lattice with the `A` fitted at the
/// largest size.
pub fn energy_convergence(
    wf: &WFunction,
    spec: &EnvironmentSpec,
    lambda: f64,
    f: &TestFunction,
    n_list: &[usize],
) -> Result<EnergyReport> {
    let report = homogenize(wf, spec, lambda, &default_rhs_family(wf.dim()), n_list)?;
    let a = report.matrix.clone();
    let rows = n_list
        .iter()
        .map(|&n| {
            let field = sample_field(spec, wf.dim(), n)?;
            let op = assemble(wf, &field)?;
            let op0 = op.with_coefficients(a.diag())?;
            let rhs = f.restrict(Lattice::new(wf.dim(), n)?);
            let u_n = solve_resolvent(&op, lambda, &rhs)?;
            let u_0 = solve_resolvent(&op0, lambda, &rhs)?;
            let (l2_n, l2_0) = (u_n.norm_sq(), u_0.norm_sq());
            let (energy_n, energy_0) = (op.energy(&u_n), op0.energy(&u_0));
            Ok(EnergyRow {
                n,
                l2_n,
                l2_0,
                energy_n,
                energy_0,
                l2_gap: (l2_n - l2_0).abs(),
                energy_gap: (energy_n - energy_0).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnergyReport {
        matrix: a,
        fits: report.fits,
        rows,
    })
}
