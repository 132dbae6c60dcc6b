use super::field::{field_scale, field_value};
use crate::dynamics::{Bond, ExclusionProcess, Observer, RateFamily, Trajectory};
use crate::operators::LatticeOperator;
use crate::{Error, LatticeFunction, Result};

/// Events between full recomputations of the drift and QV rates.
const RECOMPUTE_INTERVAL: u64 = 1 << 16;

/// `M_t = Y_t − Y_0 − ∫_0^t N²L_N Y_s ds` and its compensator `⟨M⟩_t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MartingalePath {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub m: Vec<f64>,
    pub qv: Vec<f64>,
}

impl MartingalePath {
    pub fn last_m(&self) -> f64 {
        self.m.last().copied().unwrap_or(0.0)
    }

    pub fn last_qv(&self) -> f64 {
        self.qv.last().copied().unwrap_or(0.0)
    }
}

/// Tracks the martingale of one test function along a run.
///
/// The drift `Σ_b r_b ΔY_b` and the quadratic-variation rate `Σ_b r_b ΔY_b²`
/// are piecewise constant between events and are maintained by updating
/// only the bonds touched by each exchange, so the time integrals are exact.
pub struct MartingaleObserver {
    g: Vec<f64>,
    scale: f64,
    rho: f64,
    y0: f64,
    y: f64,
    drift_rate: f64,
    qv_rate: f64,
    drift: f64,
    qv: f64,
    last: f64,
    jump: f64,
    events: u64,
    path: MartingalePath,
}

impl MartingaleObserver {
    pub fn new(g: &LatticeFunction, rho: f64) -> Self {
        MartingaleObserver {
            scale: field_scale(g),
            g: g.values().to_vec(),
            rho,
            y0: 0.0,
            y: 0.0,
            drift_rate: 0.0,
            qv_rate: 0.0,
            drift: 0.0,
            qv: 0.0,
            last: 0.0,
            jump: 0.0,
            events: 0,
            path: MartingalePath::default(),
        }
    }

    #[inline]
    fn delta(&self, p: &ExclusionProcess, bond: usize) -> f64 {
        let lattice = p.lattice();
        let d = lattice.dim();
        let x = bond / d;
        let y = lattice.shift(x, bond % d, 1);
        let occ = p.configuration().occupancy();
        self.scale * (f64::from(occ[y]) - f64::from(occ[x])) * (self.g[x] - self.g[y])
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.last;
        if dt > 0.0 {
            self.drift += self.drift_rate * dt;
            self.qv += self.qv_rate * dt;
            self.last = t;
        }
    }

    fn local(&self, p: &ExclusionProcess) -> (f64, f64) {
        p.affected().iter().fold((0.0, 0.0), |(a, b), &bond| {
            let r = p.rate(bond);
            if r == 0.0 {
                return (a, b);
            }
            let dy = self.delta(p, bond);
            (a + r * dy, b + r * dy * dy)
        })
    }

    fn recompute_rates(&mut self, p: &ExclusionProcess) {
        let (mut a, mut b) = (0.0, 0.0);
        for bond in 0..p.lattice().num_bonds() {
            let r = p.rate(bond);
            if r > 0.0 {
                let dy = self.delta(p, bond);
                a += r * dy;
                b += r * dy * dy;
            }
        }
        self.drift_rate = a;
        self.qv_rate = b;
    }

    pub fn m(&self) -> f64 {
        self.y - self.y0 - self.drift
    }

    pub fn qv(&self) -> f64 {
        self.qv
    }

    /// Current drift `N²L_N Y(G)`.
    pub fn drift_rate(&self) -> f64 {
        self.drift_rate
    }

    pub fn qv_rate(&self) -> f64 {
        self.qv_rate
    }

    pub fn into_path(self) -> MartingalePath {
        self.path
    }
}

impl Observer for MartingaleObserver {
    fn on_start(&mut self, p: &ExclusionProcess) {
        let occ = p.configuration().occupancy();
        self.y0 = self.scale
            * occ
                .iter()
                .zip(&self.g)
                .map(|(&e, g)| g * (f64::from(e) - self.rho))
                .sum::<f64>();
        self.y = self.y0;
        self.last = p.time();
        self.drift = 0.0;
        self.qv = 0.0;
        self.recompute_rates(p);
    }

    fn before_event(&mut self, p: &ExclusionProcess, time: f64, bond: Bond) {
        self.advance(time);
        let (a, b) = self.local(p);
        self.drift_rate -= a;
        self.qv_rate -= b;
        self.jump = self.delta(p, bond.index(p.lattice().dim()));
    }

    fn after_event(&mut self, p: &ExclusionProcess, _time: f64, _bond: Bond) {
        let (a, b) = self.local(p);
        self.drift_rate += a;
        self.qv_rate = (self.qv_rate + b).max(0.0);
        self.y += self.jump;
        self.events += 1;
        if self.events.is_multiple_of(RECOMPUTE_INTERVAL) {
            self.recompute_rates(p);
        }
    }

    fn on_sample(&mut self, _p: &ExclusionProcess, time: f64) {
        self.advance(time);
        self.path.times.push(time);
        self.path.y.push(self.y);
        self.path.m.push(self.m());
        self.path.qv.push(self.qv);
    }

    fn on_end(&mut self, _p: &ExclusionProcess, time: f64) {
        self.advance(time);
        if self.path.times.last() != Some(&time) {
            self.on_sample(_p, time);
        }
    }
}

/// Replays `traj` and returns the martingale path sampled at `times` and at the final time.
pub fn martingale_path(traj: &Trajectory, g: &LatticeFunction, rho: f64, times: &[f64]) -> Result<MartingalePath> {
    if g.lattice() != traj.lattice() {
        return Err(Error::DimensionMismatch(
            "trajectory and test function lattices differ".into(),
        ));
    }
    let mut obs = MartingaleObserver::new(g, rho);
    traj.replay(times, &mut [&mut obs])?;
    Ok(obs.into_path())
}

/// `t · 2χ(ρ)φ′(ρ) · N^{-(d-1)} Σ_j Σ_x a_j (∂ᴺ_{W_j}G)² ΔW_j`, the
/// stationary expectation of `⟨M⟩_t`.
pub fn qv_expectation(g: &LatticeFunction, op: &LatticeOperator, rho: f64, family: RateFamily, t: f64) -> Result<f64> {
    op.check(g)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("density must lie in [0, 1], got {rho}")));
    }
    let chi = rho * (1.0 - rho);
    Ok(t * 2.0 * chi * family.phi_prime(rho) * op.energy(g))
}

/// `Y_t(G)` recomputed from scratch, for cross-checking the observer.
pub fn field_at(p: &ExclusionProcess, g: &LatticeFunction, rho: f64) -> f64 {
    field_value(p.configuration(), g, rho).expect("matching lattices")
}
