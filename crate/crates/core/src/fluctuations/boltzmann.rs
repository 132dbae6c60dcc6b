use super::field::field_scale;
use crate::dynamics::{Bond, ExclusionProcess, Observer, RateFamily, Trajectory};
use crate::{Error, Lattice, LatticeFunction, Result};

/// A polynomial cylinder function `f(η) = Σ_m c_m Π_{o ∈ S_m} η(o)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderFunction {
    label: String,
    d: usize,
    terms: Vec<(f64, Vec<Vec<i64>>)>,
}

impl CylinderFunction {
    /// Offsets inside a monomial are deduplicated, since `η² = η`.
    pub fn new(label: impl Into<String>, d: usize, terms: Vec<(f64, Vec<Vec<i64>>)>) -> Result<Self> {
        let mut clean = Vec::with_capacity(terms.len());
        for (c, mut offsets) in terms {
            if !c.is_finite() {
                return Err(Error::param("f", "coefficients must be finite"));
            }
            if offsets.iter().any(|o| o.len() != d) {
                return Err(Error::DimensionMismatch(format!(
                    "cylinder offsets must have {d} components"
                )));
            }
            offsets.sort();
            offsets.dedup();
            clean.push((c, offsets));
        }
        Ok(CylinderFunction {
            label: label.into(),
            d,
            terms: clean,
        })
    }

    fn unit(d: usize, axis: usize, k: i64) -> Vec<i64> {
        let mut o = vec![0; d];
        o[axis] = k;
        o
    }

    /// `η(0)`.
    pub fn linear(d: usize) -> Self {
        Self::new("eta0", d, vec![(1.0, vec![vec![0; d]])]).expect("valid")
    }

    /// `h_{1,j} = η(0)η(e_j)`.
    pub fn h1(d: usize, axis: usize) -> Self {
        let terms = vec![(1.0, vec![vec![0; d], Self::unit(d, axis, 1)])];
        Self::new(format!("h1{}", axis + 1), d, terms).expect("valid")
    }

    /// `h_{2,j} = η(−e_j)η(e_j)`.
    pub fn h2(d: usize, axis: usize) -> Self {
        let terms = vec![(1.0, vec![Self::unit(d, axis, -1), Self::unit(d, axis, 1)])];
        Self::new(format!("h2{}", axis + 1), d, terms).expect("valid")
    }

    /// `eta0`, `h1j` or `h2j` with a one-based axis `j`.
    pub fn parse(label: &str, d: usize) -> Result<Self> {
        let unsupported = || Error::Unsupported(format!("cylinder function '{label}'"));
        if label == "eta0" {
            return Ok(Self::linear(d));
        }
        let axis: usize = label.get(2..).and_then(|s| s.parse().ok()).ok_or_else(unsupported)?;
        if axis == 0 || axis > d {
            return Err(unsupported());
        }
        match label.get(..2) {
            Some("h1") => Ok(Self::h1(d, axis - 1)),
            Some("h2") => Ok(Self::h2(d, axis - 1)),
            _ => Err(unsupported()),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[(f64, Vec<Vec<i64>>)] {
        &self.terms
    }

    /// `ψ(ρ) = E_{ν_ρ}[f]`.
    pub fn psi(&self, rho: f64) -> f64 {
        self.terms.iter().map(|(c, s)| c * rho.powi(s.len() as i32)).sum()
    }

    /// `ψ′(ρ)`.
    pub fn psi_prime(&self, rho: f64) -> f64 {
        self.terms
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .map(|(c, s)| c * s.len() as f64 * rho.powi(s.len() as i32 - 1))
            .sum()
    }

    /// `f(τ_x η)`.
    pub fn eval(&self, lattice: &Lattice, occ: &[u8], x: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, s)| {
                if s.iter().all(|o| occ[lattice.translate(x, o)] == 1) {
                    *c
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `V_f(x, η) = f(τ_xη) − ψ(ρ) − ψ′(ρ)(η(x) − ρ)`.
    pub fn centred(&self, lattice: &Lattice, occ: &[u8], x: usize, rho: f64) -> f64 {
        self.eval(lattice, occ, x) - self.psi(rho) - self.psi_prime(rho) * (f64::from(occ[x]) - rho)
    }
}

struct WeightedTerm {
    weights: Vec<f64>,
    f: CylinderFunction,
    psi: f64,
    dpsi: f64,
}

/// Accumulates `Z_t = ∫_0^t N^{-d/2} Σ_k Σ_x w_k(x) V_{f_k}(x, η_s) ds` exactly.
pub struct BgObserver {
    terms: Vec<WeightedTerm>,
    reach: Vec<Vec<i64>>,
    rho: f64,
    scale: f64,
    rate: f64,
    integral: f64,
    last: f64,
    sites: Vec<usize>,
    samples: Vec<(f64, f64)>,
}

impl BgObserver {
    pub fn new(rho: f64, terms: Vec<(LatticeFunction, CylinderFunction)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::param("f", "no cylinder terms"))?;
        let lattice = first.0.lattice();
        let scale = field_scale(&first.0);
        let mut reach = vec![vec![0i64; lattice.dim()]];
        let mut out = Vec::with_capacity(terms.len());
        for (w, f) in terms {
            if w.lattice() != lattice || f.dim() != lattice.dim() {
                return Err(Error::DimensionMismatch(
                    "weights and cylinder functions disagree on the lattice".into(),
                ));
            }
            for (_, s) in f.terms() {
                reach.extend(s.iter().map(|o| o.iter().map(|v| -v).collect::<Vec<i64>>()));
            }
            out.push(WeightedTerm {
                psi: f.psi(rho),
                dpsi: f.psi_prime(rho),
                weights: w.into_values(),
                f,
            });
        }
        reach.sort();
        reach.dedup();
        Ok(BgObserver {
            terms: out,
            reach,
            rho,
            scale,
            rate: 0.0,
            integral: 0.0,
            last: 0.0,
            sites: Vec::new(),
            samples: Vec::new(),
        })
    }

    fn local(&self, lattice: &Lattice, occ: &[u8], x: usize) -> f64 {
        let lin = f64::from(occ[x]) - self.rho;
        self.terms
            .iter()
            .map(|t| {
                let w = t.weights[x];
                if w == 0.0 {
                    0.0
                } else {
                    w * (t.f.eval(lattice, occ, x) - t.psi - t.dpsi * lin)
                }
            })
            .sum()
    }

    fn advance(&mut self, t: f64) {
        if t > self.last {
            self.integral += self.rate * (t - self.last);
            self.last = t;
        }
    }

    fn touch(&mut self, p: &ExclusionProcess, bond: Bond) {
        let lattice = p.lattice();
        let y = lattice.shift(bond.site, bond.axis, 1);
        let mut sites = std::mem::take(&mut self.sites);
        sites.clear();
        for s in [bond.site, y] {
            for o in &self.reach {
                let z = lattice.translate(s, o);
                if !sites.contains(&z) {
                    sites.push(z);
                }
            }
        }
        self.sites = sites;
    }

    /// Current integrand `N^{-d/2} Σ_k Σ_x w_k(x) V_{f_k}(x, η)`.
    pub fn integrand(&self) -> f64 {
        self.rate * self.scale
    }

    /// `Z_t` up to the last processed time.
    pub fn value(&self) -> f64 {
        self.integral * self.scale
    }

    /// `(t, Z_t)` at each sample time.
    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}

impl Observer for BgObserver {
    fn on_start(&mut self, p: &ExclusionProcess) {
        let lattice = p.lattice();
        let occ = p.configuration().occupancy();
        self.rate = (0..lattice.num_sites()).map(|x| self.local(&lattice, occ, x)).sum();
        self.integral = 0.0;
        self.last = p.time();
    }

    fn before_event(&mut self, p: &ExclusionProcess, time: f64, bond: Bond) {
        self.advance(time);
        self.touch(p, bond);
        let lattice = p.lattice();
        let occ = p.configuration().occupancy();
        let old: f64 = self.sites.iter().map(|&x| self.local(&lattice, occ, x)).sum();
        self.rate -= old;
    }

    fn after_event(&mut self, p: &ExclusionProcess, _time: f64, _bond: Bond) {
        let lattice = p.lattice();
        let occ = p.configuration().occupancy();
        let new: f64 = self.sites.iter().map(|&x| self.local(&lattice, occ, x)).sum();
        self.rate += new;
    }

    fn on_sample(&mut self, _p: &ExclusionProcess, time: f64) {
        self.advance(time);
        self.samples.push((time, self.value()));
    }

    fn on_end(&mut self, _p: &ExclusionProcess, time: f64) {
        self.advance(time);
    }
}

/// `Z_T = ∫_0^T N^{-d/2} Σ_x G(x/N) V_f(x, η_s) ds` along a recorded trajectory.
pub fn bg_statistic(traj: &Trajectory, g: &LatticeFunction, f: &CylinderFunction, rho: f64) -> Result<f64> {
    if g.lattice() != traj.lattice() {
        return Err(Error::DimensionMismatch(
            "trajectory and test function lattices differ".into(),
        ));
    }
    let mut obs = BgObserver::new(rho, vec![(g.clone(), f.clone())])?;
    traj.replay(&[], &mut [&mut obs])?;
    Ok(obs.value())
}

/// Weights of the local terms in the drift of `Y(G)` under the standard
/// family: `b(𝕃^jG(x+e_j) + 𝕃^jG(x))` on `h_{1,j}` and `−b𝕃^jG(x)` on `h_{2,j}`.
pub fn replacement_terms(
    conductance: impl Fn(usize) -> f64,
    g: &LatticeFunction,
    b: f64,
) -> Vec<(LatticeFunction, CylinderFunction)> {
    let lattice = g.lattice();
    let d = lattice.dim();
    let gv = g.values();
    let mut out = Vec::with_capacity(2 * d);
    for j in 0..d {
        let lj: Vec<f64> = (0..lattice.num_sites())
            .map(|x| {
                let (fwd, back) = (lattice.shift(x, j, 1), lattice.shift(x, j, -1));
                conductance(x * d + j) * (gv[fwd] - gv[x]) + conductance(back * d + j) * (gv[back] - gv[x])
            })
            .collect();
        let w1 = (0..lattice.num_sites())
            .map(|x| b * (lj[lattice.shift(x, j, 1)] + lj[x]))
            .collect();
        let w2 = lj.iter().map(|v| -b * v).collect();
        out.push((
            LatticeFunction::from_values(lattice, w1).expect("finite"),
            CylinderFunction::h1(d, j),
        ));
        out.push((
            LatticeFunction::from_values(lattice, w2).expect("finite"),
            CylinderFunction::h2(d, j),
        ));
    }
    out
}

/// Time integral of the error made by replacing `τ_x h_{i,j} − ρ²` with
/// `2ρ(η(x) − ρ)` in the drift of `Y(G)`. Its mean square over replicas is
/// the replacement gap.
pub fn boltzmann_gibbs_replacement_gap(traj: &Trajectory, g: &LatticeFunction, rho: f64) -> Result<f64> {
    if g.lattice() != traj.lattice() {
        return Err(Error::DimensionMismatch(
            "trajectory and test function lattices differ".into(),
        ));
    }
    let model = traj.model();
    let b = match model.family() {
        RateFamily::Standard { b } => b,
        RateFamily::Extended { .. } => {
            return Err(Error::Unsupported(
                "replacement gap is defined for the standard family".into(),
            ))
        }
    };
    if b == 0.0 {
        return Ok(0.0);
    }
    let mut obs = BgObserver::new(rho, replacement_terms(|k| model.conductance(k), g, b))?;
    traj.replay(&[], &mut [&mut obs])?;
    Ok(obs.value())
}

/// `m!·C(k, m) / m!·C(M, m)`: the canonical expectation of a degree-`m`
/// monomial with `k` particles on `M` sites.
fn canonical_moment(k: usize, sites: usize, m: usize) -> f64 {
    (0..m)
        .map(|i| (k as f64 - i as f64) / (sites as f64 - i as f64))
        .product()
}

/// `|E[f | Σ η = k] − E_{ν_{k/M}}[f]|` on `M` sites.
pub fn equivalence_gap(f: &CylinderFunction, sites: usize, k: usize) -> Result<f64> {
    let rho = k as f64 / sites as f64;
    let mut gap = 0.0;
    for (c, s) in f.terms() {
        if s.len() > sites {
            return Err(Error::param(
                "N",
                format!("degree {} exceeds the {sites} sites", s.len()),
            ));
        }
        gap += c * (canonical_moment(k, sites, s.len()) - rho.powi(s.len() as i32));
    }
    Ok(gap.abs())
}

/// `max_k` of [`equivalence_gap`] over all particle numbers on the lattice.
pub fn equivalence_of_ensembles_check(f: &CylinderFunction, lattice: Lattice) -> Result<f64> {
    if f.dim() != lattice.dim() {
        return Err(Error::DimensionMismatch(
            "cylinder function and lattice dimensions differ".into(),
        ));
    }
    let m = lattice.num_sites();
    (0..=m).try_fold(0.0f64, |acc, k| Ok(acc.max(equivalence_gap(f, m, k)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_bernoulli, simulate, Configuration, ExclusionModel};
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::WFunction;
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn psi_of_builtins() {
        let h = CylinderFunction::h1(2, 1);
        assert_eq!(h.psi(0.3), 0.09);
        assert!((h.psi_prime(0.3) - 0.6).abs() < 1e-15);
        let lin = CylinderFunction::linear(1);
        assert_eq!((lin.psi(0.4), lin.psi_prime(0.4)), (0.4, 1.0));
        let dup = CylinderFunction::new("sq", 1, vec![(1.0, vec![vec![0], vec![0]])]).unwrap();
        assert_eq!(dup.psi(0.5), 0.5);
        assert!(CylinderFunction::parse("h13", 2).is_err());
        assert!(CylinderFunction::parse("exp", 1).is_err());
        assert_eq!(CylinderFunction::parse("h21", 1).unwrap(), CylinderFunction::h2(1, 0));
    }

    #[test]
    fn centred_values() {
        let l = Lattice::new(1, 5).unwrap();
        let cfg = Configuration::with_particles(l, &[0, 1, 4]);
        let h1 = CylinderFunction::h1(1, 0);
        let h2 = CylinderFunction::h2(1, 0);
        assert_eq!(h1.eval(&l, cfg.occupancy(), 0), 1.0);
        assert_eq!(h1.eval(&l, cfg.occupancy(), 1), 0.0);
        assert_eq!(h2.eval(&l, cfg.occupancy(), 0), 1.0);
        let v = h1.centred(&l, cfg.occupancy(), 4, 0.5);
        assert!((v - (1.0 - 0.25 - 0.5)).abs() < 1e-15);
        assert_eq!(CylinderFunction::linear(1).centred(&l, cfg.occupancy(), 2, 0.3), 0.0);
    }

    fn flat_run(n: usize, rho: f64, b: f64, t: f64, seed: u64) -> Trajectory {
        let field = sample_field(&EnvironmentSpec::constant(1.0), 1, n).unwrap();
        let op = assemble(&WFunction::identity(1), &field).unwrap();
        let model = Arc::new(ExclusionModel::new(&op, RateFamily::standard(b).unwrap()));
        let cfg = sample_bernoulli(rho, op.lattice(), seed).unwrap();
        simulate(model, cfg, t, seed, &[], &mut []).unwrap()
    }

    #[test]
    fn linear_and_frozen_statistics_vanish() {
        let traj = flat_run(32, 0.5, 0.3, 0.01, 1);
        let g = LatticeFunction::from_fn(traj.lattice(), |x| (2.0 * PI * x[0]).cos());
        assert_eq!(bg_statistic(&traj, &g, &CylinderFunction::linear(1), 0.5).unwrap(), 0.0);
        for rho in [0.0, 1.0] {
            let frozen = flat_run(32, rho, 0.3, 0.01, 2);
            let z = bg_statistic(&frozen, &g, &CylinderFunction::h1(1, 0), rho).unwrap();
            assert!(z.abs() < 1e-15);
            assert!(boltzmann_gibbs_replacement_gap(&frozen, &g, rho).unwrap().abs() < 1e-12);
        }
        assert_eq!(
            boltzmann_gibbs_replacement_gap(&flat_run(32, 0.5, 0.0, 0.01, 3), &g, 0.5).unwrap(),
            0.0
        );
    }

    #[test]
    fn incremental_integral_matches_riemann_sum() {
        let traj = flat_run(16, 0.5, 0.5, 0.02, 4);
        let l = traj.lattice();
        let g = LatticeFunction::from_fn(l, |x| (2.0 * PI * x[0]).sin() + 0.3);
        let f = CylinderFunction::h2(1, 0);
        let z = bg_statistic(&traj, &g, &f, 0.5).unwrap();
        let mut cfg = traj.initial().clone();
        let mut last = 0.0;
        let mut direct = 0.0;
        let integrand = |c: &Configuration| -> f64 {
            (0..l.num_sites())
                .map(|x| g.values()[x] * f.centred(&l, c.occupancy(), x, 0.5))
                .sum::<f64>()
                / 4.0
        };
        for e in traj.events() {
            direct += integrand(&cfg) * (e.time - last);
            last = e.time;
            cfg.exchange(e.bond.site, l.shift(e.bond.site, 0, 1));
        }
        direct += integrand(&cfg) * (traj.final_time() - last);
        assert!((z - direct).abs() < 1e-10, "{z} vs {direct}");
    }

    #[test]
    fn hypergeometric_second_moment() {
        let f = CylinderFunction::h1(1, 0);
        let m = 20usize;
        for k in 0..=m {
            let expected = (k * (m - k)) as f64 / ((m * m) as f64 * (m - 1) as f64);
            assert!((equivalence_gap(&f, m, k).unwrap() - expected).abs() < 1e-15);
        }
        let lin = CylinderFunction::linear(1);
        assert_eq!(
            equivalence_of_ensembles_check(&lin, Lattice::new(1, 8).unwrap()).unwrap(),
            0.0
        );
        let worst = equivalence_of_ensembles_check(&f, Lattice::new(1, 8).unwrap()).unwrap();
        assert!(worst <= 1.0 / (4.0 * 7.0) + 1e-15);
    }
}
