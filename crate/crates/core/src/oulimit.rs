//! Exact spectral simulation of the limiting Ornstein-Uhlenbeck field.
//!
//! The limit lives on a reference grid carrying the constant-coefficient
//! operator `∇A∇_W`. Each eigenmode is a scalar OU process with rate
//! `φ′(ρ)α_k` and stationary variance `χ(ρ)`, advanced by its exact
//! Gaussian transition.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::RateFamily;
use crate::env::EnvironmentField;
use crate::fluctuations::{FieldSeries, TestFunction};
use crate::operators::{assemble, eigendecompose, EigenBasis, HomogenizedMatrix, LatticeOperator};
use crate::rng::{chacha, derive_seed, stream};
use crate::stats::{z_score, Moments};
use crate::wfunc::WFunction;
use crate::{Error, Lattice, Result};

/// Omitted modes may carry at most this fraction of `Σ⟨G, φ_k⟩²`.
pub const TRUNCATION: f64 = 1e-6;

/// Default reference resolution per axis.
pub fn default_reference_size(d: usize) -> usize {
    match d {
        1 => 512,
        2 => 128,
        _ => 32,
    }
}

/// Characteristics of the limit process.
#[derive(Clone, Debug)]
pub struct OUParams {
    rho: f64,
    family: RateFamily,
    matrix: HomogenizedMatrix,
    op: LatticeOperator,
    basis: EigenBasis,
}

impl OUParams {
    /// Builds the reference operator `∇A∇_W` on `n_ref^d` sites and its
    /// `modes` lowest eigenpairs.
    pub fn new(
        rho: f64,
        family: RateFamily,
        wf: &WFunction,
        matrix: HomogenizedMatrix,
        n_ref: usize,
        modes: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::param("rho", format!("density must lie in [0, 1], got {rho}")));
        }
        if matrix.dim() != wf.dim() {
            return Err(Error::DimensionMismatch("A and W have different dimensions".into()));
        }
        let lattice = Lattice::new(wf.dim(), n_ref)?;
        let field = EnvironmentField::constant_per_axis(lattice, matrix.diag())?;
        let op = assemble(wf, &field)?;
        let basis = eigendecompose(&op, modes.min(lattice.num_sites()))?;
        Ok(OUParams {
            rho,
            family,
            matrix,
            op,
            basis,
        })
    }

    /// Like [`OUParams::new`], doubling the mode count from `modes` until
    /// every function in `g_list` meets the truncation rule.
    pub fn covering(
        rho: f64,
        family: RateFamily,
        wf: &WFunction,
        matrix: HomogenizedMatrix,
        n_ref: usize,
        modes: usize,
        g_list: &[TestFunction],
    ) -> Result<Self> {
        let sites = Lattice::new(wf.dim(), n_ref)?.num_sites();
        let mut k = modes.max(1);
        loop {
            let params = OUParams::new(rho, family, wf, matrix.clone(), n_ref, k)?;
            match g_list.iter().try_for_each(|g| params.expansion(g).map(drop)) {
                Err(Error::InsufficientBasis { .. }) if k < sites => k = (2 * k).min(sites),
                other => return other.map(|()| params),
            }
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn family(&self) -> RateFamily {
        self.family
    }

    /// `χ(ρ) = ρ(1 − ρ)`.
    pub fn chi(&self) -> f64 {
        self.rho * (1.0 - self.rho)
    }

    pub fn phi_prime(&self) -> f64 {
        self.family.phi_prime(self.rho)
    }

    pub fn matrix(&self) -> &HomogenizedMatrix {
        &self.matrix
    }

    pub fn operator(&self) -> &LatticeOperator {
        &self.op
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn reference_lattice(&self) -> Lattice {
        self.basis.lattice()
    }

    /// Mode coefficients `⟨G, φ_k⟩`, cut after the last mode needed to keep
    /// the omitted mass below [`TRUNCATION`].
    pub fn expansion(&self, g: &TestFunction) -> Result<Vec<f64>> {
        let gl = g.restrict(self.reference_lattice());
        let total = gl.norm_sq();
        let mut coeffs = self.basis.coefficients(&gl);
        let captured: f64 = coeffs.iter().map(|c| c * c).sum();
        if total > 0.0 && captured < (1.0 - TRUNCATION) * total {
            return Err(Error::InsufficientBasis {
                captured: captured / total,
            });
        }
        let mut tail = total - captured;
        let mut keep = coeffs.len();
        while keep > 1 && tail + coeffs[keep - 1].powi(2) <= TRUNCATION * total {
            tail += coeffs[keep - 1].powi(2);
            keep -= 1;
        }
        coeffs.truncate(keep);
        Ok(coeffs)
    }
}

/// `y e^{−rΔ} + √(χ(1 − e^{−2rΔ})) z`, the exact OU transition.
#[inline]
fn ou_step(y: f64, rate: f64, chi: f64, dt: f64, z: f64) -> f64 {
    let decay = (-rate * dt).exp();
    y * decay + (chi * (1.0 - decay * decay)).max(0.0).sqrt() * z
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param(
            "times",
            "sample times must be finite, nonnegative and sorted",
        ));
    }
    Ok(())
}

/// One stationary replica of the limit field, sampled at `times`.
pub fn ou_simulate(
    params: &OUParams,
    g_list: &[TestFunction],
    times: &[f64],
    seed: u64,
    replica: u64,
) -> Result<FieldSeries> {
    check_times(times)?;
    let expansions = g_list.iter().map(|g| params.expansion(g)).collect::<Result<Vec<_>>>()?;
    Ok(simulate_with(params, g_list, &expansions, times, seed, replica))
}

fn simulate_with(
    params: &OUParams,
    g_list: &[TestFunction],
    expansions: &[Vec<f64>],
    times: &[f64],
    seed: u64,
    replica: u64,
) -> FieldSeries {
    let modes = expansions.iter().map(Vec::len).max().unwrap_or(0);
    let chi = params.chi();
    let phi = params.phi_prime();
    let mut rng = chacha(derive_seed(seed, stream::OU, replica));
    let mut y: Vec<f64> = (0..modes)
        .map(|_| chi.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let labels = g_list.iter().map(|g| g.label().to_string()).collect();
    let mut series = FieldSeries::new(replica, params.rho, times.to_vec(), labels);
    let mut now = 0.0;
    for &t in times {
        let dt = t - now;
        if dt > 0.0 {
            for (k, yk) in y.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *yk = ou_step(*yk, phi * params.basis.alpha(k), chi, dt, z);
            }
            now = t;
        }
        for (c, out) in expansions.iter().zip(series.values.iter_mut()) {
            out.push(c.iter().zip(&y).map(|(c, y)| c * y).sum());
        }
    }
    series
}

/// Independent replicas `0..replicas`, in replica order.
pub fn ou_ensemble(
    params: &OUParams,
    g_list: &[TestFunction],
    times: &[f64],
    replicas: u64,
    seed: u64,
) -> Result<Vec<FieldSeries>> {
    check_times(times)?;
    let expansions = g_list.iter().map(|g| params.expansion(g)).collect::<Result<Vec<_>>>()?;
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| simulate_with(params, g_list, &expansions, times, seed, r))
        .collect())
}

/// `E[Y_0(G)Y_0(H)] = χ(ρ)⟨G, H⟩` on the reference grid.
pub fn stationary_covariance(params: &OUParams, g: &TestFunction, h: &TestFunction) -> f64 {
    let l = params.reference_lattice();
    params.chi() * g.restrict(l).inner(&h.restrict(l))
}

/// `E[Y_t(G)Y_0(G)] = χ Σ_k ⟨G, φ_k⟩² e^{−φ′α_k t}`.
pub fn time_correlation(params: &OUParams, g: &TestFunction, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("lag must be nonnegative, got {t}")));
    }
    let c = params.expansion(g)?;
    let phi = params.phi_prime();
    Ok(params.chi()
        * c.iter()
            .enumerate()
            .map(|(k, c)| c * c * (-phi * params.basis.alpha(k) * t).exp())
            .sum::<f64>())
}

/// `⟨N(G)⟩_t = t Σ_k ⟨G, φ_k⟩² α_k` for the driving martingale.
pub fn noise_quadratic_variation(params: &OUParams, g: &TestFunction, t: f64) -> Result<f64> {
    let c = params.expansion(g)?;
    Ok(t * c
        .iter()
        .enumerate()
        .map(|(k, c)| c * c * params.basis.alpha(k))
        .sum::<f64>())
}

/// One line of a comparison report.
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub label: String,
    pub t: f64,
    pub lag: f64,
    pub stat: &'static str,
    pub value: f64,
    pub expected: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub threshold: f64,
}

impl CompareReport {
    pub fn flagged(&self) -> impl Iterator<Item = &CompareRow> {
        self.rows.iter().filter(move |r| !(r.z.abs() <= self.threshold))
    }

    pub fn passed(&self) -> bool {
        self.flagged().next().is_none()
    }

    /// Largest `|z|` among rows with the given statistic.
    pub fn max_abs_z(&self, stat: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.stat == stat)
            .map(|r| r.z.abs())
            .fold(0.0, f64::max)
    }
}

/// z-scores of replica statistics against the limit process.
///
/// For every `G` and sample time: mean (against 0), variance (against
/// `χ‖G‖²`), skewness and excess kurtosis (against 0). For every later
/// time `t_i`: the mean of `Y_{t_i}Y_{t_0}` against the time correlation
/// at lag `t_i − t_0`. Rows with `|z| > 3` are flagged.
pub fn compare(empirical: &[FieldSeries], params: &OUParams, g_list: &[TestFunction]) -> Result<CompareReport> {
    let first = empirical
        .first()
        .ok_or_else(|| Error::Mismatch("no empirical series".into()))?;
    let times = &first.times;
    for s in empirical {
        if &s.times != times {
            return Err(Error::Mismatch(format!(
                "replica {} has different sample times",
                s.replica
            )));
        }
        if (s.rho - params.rho).abs() > 1e-12 {
            return Err(Error::Mismatch(format!(
                "replica {} has ρ = {}, limit has ρ = {}",
                s.replica, s.rho, params.rho
            )));
        }
    }
    let mut rows = Vec::new();
    for g in g_list {
        let data = empirical
            .iter()
            .map(|s| {
                s.series(g.label())
                    .filter(|v| v.len() == times.len())
                    .ok_or_else(|| Error::Mismatch(format!("replica {} lacks '{}'", s.replica, g.label())))
            })
            .collect::<Result<Vec<_>>>()?;
        let var = stationary_covariance(params, g, g);
        for (i, &t) in times.iter().enumerate() {
            let ys: Vec<f64> = data.iter().map(|v| v[i]).collect();
            let m = Moments::of(&ys);
            let row = |stat, value, expected, z| CompareRow {
                label: g.label().to_string(),
                t,
                lag: 0.0,
                stat,
                value,
                expected,
                z,
            };
            rows.push(row("mean", m.mean, 0.0, m.z_mean(0.0)));
            rows.push(row("variance", m.variance, var, m.z_variance(var)));
            rows.push(row(
                "skewness",
                m.skewness(),
                0.0,
                if var > 0.0 { m.z_skewness() } else { 0.0 },
            ));
            rows.push(row(
                "kurtosis",
                m.excess_kurtosis(),
                0.0,
                if var > 0.0 { m.z_kurtosis() } else { 0.0 },
            ));
            if i > 0 {
                let lag = t - times[0];
                let prods: Vec<f64> = data.iter().map(|v| v[i] * v[0]).collect();
                let pm = Moments::of(&prods);
                let expected = time_correlation(params, g, lag)?;
                rows.push(CompareRow {
                    label: g.label().to_string(),
                    t,
                    lag,
                    stat: "autocovariance",
                    value: pm.mean,
                    expected,
                    z: z_score(pm.mean - expected, pm.stderr()),
                });
            }
        }
    }
    Ok(CompareReport { rows, threshold: 3.0 })
}
