use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::trajectory::{Event, Trajectory};
use super::{Configuration, RateFamily};
use crate::operators::LatticeOperator;
use crate::rng::{chacha, derive_seed, stream};
use crate::{Error, Lattice, Result};

/// Full rate recomputation interval, in events.
const RESYNC_INTERVAL: u64 = 1_000_000;

/// The bond `(site, site + e_axis)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub site: usize,
    pub axis: usize,
}

impl Bond {
    #[inline]
    pub fn index(&self, d: usize) -> usize {
        self.site * d + self.axis
    }

    #[inline]
    pub fn from_index(index: usize, d: usize) -> Bond {
        Bond {
            site: index / d,
            axis: index % d,
        }
    }
}

/// Static data of one exclusion system: conductances `N²ξ` and the rate family.
#[derive(Clone, Debug)]
pub struct ExclusionModel {
    lattice: Lattice,
    conductance: Vec<f64>,
    family: RateFamily,
}

impl ExclusionModel {
    pub fn new(op: &LatticeOperator, family: RateFamily) -> Self {
        ExclusionModel {
            lattice: op.lattice(),
            conductance: op.conductances().to_vec(),
            family,
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn family(&self) -> RateFamily {
        self.family
    }

    pub fn conductance(&self, bond: usize) -> f64 {
        self.conductance[bond]
    }

    /// Exchange rate of `bond` in `occ`; zero when the bond is not discordant.
    #[inline]
    pub fn rate(&self, occ: &[u8], bond: usize) -> f64 {
        let d = self.lattice.dim();
        let (x, j) = (bond / d, bond % d);
        let y = self.lattice.shift(x, j, 1);
        if occ[x] == occ[y] {
            0.0
        } else {
            self.conductance[bond] * self.family.factor(&self.lattice, occ, x, j)
        }
    }

    /// Bonds whose rate can change when the occupations of `x` and `y` do.
    pub fn affected_bonds(&self, x: usize, y: usize, out: &mut Vec<usize>) {
        out.clear();
        let d = self.lattice.dim();
        let (lo, hi) = self.family.window();
        for &s in &[x, y] {
            for axis in 0..d {
                for k in lo..=hi {
                    // Bond (z, z+e) reads sites z+lo ..= z+hi.
                    let z = self.lattice.shift(s, axis, -k);
                    let b = z * d + axis;
                    if !out.contains(&b) {
                        out.push(b);
                    }
                }
            }
        }
    }
}

/// Hooks called by the simulation loop.
///
/// `before_event` sees the state just before the exchange at `time`, and
/// [`ExclusionProcess::affected`] already lists the bonds about to change;
/// `after_event` sees the updated state and rates.
pub trait Observer {
    fn on_start(&mut self, _process: &ExclusionProcess) {}
    fn before_event(&mut self, _process: &ExclusionProcess, _time: f64, _bond: Bond) {}
    fn after_event(&mut self, _process: &ExclusionProcess, _time: f64, _bond: Bond) {}
    fn on_sample(&mut self, _process: &ExclusionProcess, _time: f64) {}
    fn on_end(&mut self, _process: &ExclusionProcess, _time: f64) {}
}

/// Outcome of a single [`ExclusionProcess::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    /// Holding time; `+∞` when no bond is active.
    pub dt: f64,
    pub bond: Option<Bond>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub events: u64,
    pub final_time: f64,
    pub final_density: f64,
}

/// Sum tree over bond rates. Internal nodes are always recomputed from
/// their children, so the root is an exact function of the leaves.
#[derive(Clone, Debug)]
struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(leaves: &[f64]) -> Self {
        let size = leaves.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * size];
        nodes[size..size + leaves.len()].copy_from_slice(leaves);
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        SumTree { size, nodes }
    }

    #[inline]
    fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    fn set(&mut self, i: usize, value: f64) {
        let mut k = self.size + i;
        self.nodes[k] = value;
        k /= 2;
        while k >= 1 {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            k /= 2;
        }
    }

    /// Leaf `i` with `Σ_{k<i} leaf_k ≤ target < Σ_{k≤i} leaf_k`.
    fn find(&self, mut target: f64) -> usize {
        let mut k = 1;
        while k < self.size {
            let left = self.nodes[2 * k];
            if target < left {
                k *= 2;
            } else {
                target -= left;
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}

/// A running exclusion process.
pub struct ExclusionProcess {
    model: Arc<ExclusionModel>,
    cfg: Configuration,
    tree: SumTree,
    active: usize,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
    affected: Vec<usize>,
    since_resync: u64,
    resync_drift: f64,
}

impl ExclusionProcess {
    pub fn new(model: Arc<ExclusionModel>, cfg: Configuration, seed: u64) -> Result<Self> {
        if cfg.lattice() != model.lattice() {
            return Err(Error::DimensionMismatch(
                "configuration and model lattices differ".into(),
            ));
        }
        if let Some(c) = model.conductance.iter().find(|c| !c.is_normal()) {
            return Err(Error::param(
                "W",
                format!("bond conductance {c:e} underflows or overflows"),
            ));
        }
        let rates: Vec<f64> = (0..model.lattice().num_bonds())
            .map(|b| model.rate(cfg.occupancy(), b))
            .collect();
        if !rates.iter().sum::<f64>().is_finite() {
            return Err(Error::param("W", "total jump rate overflows"));
        }
        let active = rates.iter().filter(|&&r| r > 0.0).count();
        Ok(ExclusionProcess {
            tree: SumTree::new(&rates),
            model,
            cfg,
            active,
            time: 0.0,
            events: 0,
            rng: chacha(seed),
            affected: Vec::new(),
            since_resync: 0,
            resync_drift: 0.0,
        })
    }

    pub fn model(&self) -> &ExclusionModel {
        &self.model
    }

    pub fn lattice(&self) -> Lattice {
        self.model.lattice
    }

    pub fn configuration(&self) -> &Configuration {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Current rate of a bond index.
    #[inline]
    pub fn rate(&self, bond: usize) -> f64 {
        self.tree.get(bond)
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn active_bonds(&self) -> usize {
        self.active
    }

    /// Bonds touched by the event being processed.
    pub fn affected(&self) -> &[usize] {
        &self.affected
    }

    /// Largest relative gap seen between the incremental total and a full
    /// recomputation.
    pub fn resync_drift(&self) -> f64 {
        self.resync_drift
    }

    /// Recomputes every rate from scratch and returns the relative gap to
    /// the incrementally maintained total.
    pub fn resync(&mut self) -> f64 {
        let rates: Vec<f64> = (0..self.model.lattice.num_bonds())
            .map(|b| self.model.rate(self.cfg.occupancy(), b))
            .collect();
        let fresh: f64 = rates.iter().sum();
        let old = self.tree.total();
        let drift = if fresh > 0.0 {
            (old - fresh).abs() / fresh
        } else {
            old.abs()
        };
        self.resync_drift = self.resync_drift.max(drift);
        self.active = rates.iter().filter(|&&r| r > 0.0).count();
        self.tree = SumTree::new(&rates);
        self.since_resync = 0;
        drift
    }

    fn sample_bond(&mut self) -> usize {
        loop {
            let u: f64 = self.rng.random();
            let b = self.tree.find(u * self.tree.total());
            if b < self.model.lattice.num_bonds() && self.tree.get(b) > 0.0 {
                return b;
            }
        }
    }

    fn next_holding_time(&mut self) -> f64 {
        if self.active == 0 {
            return f64::INFINITY;
        }
        loop {
            let e: f64 = self.rng.sample(Exp1);
            let dt = e / self.tree.total();
            if dt > 0.0 {
                return dt;
            }
        }
    }

    fn execute(&mut self, time: f64, bond: Bond, observers: &mut [&mut dyn Observer]) {
        let lattice = self.model.lattice;
        let y = lattice.shift(bond.site, bond.axis, 1);
        let mut affected = std::mem::take(&mut self.affected);
        self.model.affected_bonds(bond.site, y, &mut affected);
        self.affected = affected;
        for o in observers.iter_mut() {
            o.before_event(self, time, bond);
        }
        self.cfg.exchange(bond.site, y);
        for i in 0..self.affected.len() {
            let b = self.affected[i];
            let old = self.tree.get(b);
            let new = self.model.rate(self.cfg.occupancy(), b);
            if old != new {
                match (old > 0.0, new > 0.0) {
                    (false, true) => self.active += 1,
                    (true, false) => self.active -= 1,
                    _ => {}
                }
                self.tree.set(b, new);
            }
        }
        self.time = time;
        self.events += 1;
        self.since_resync += 1;
        if self.since_resync >= RESYNC_INTERVAL {
            self.resync();
        }
        for o in observers.iter_mut() {
            o.after_event(self, time, bond);
        }
    }

    /// One exchange with no observers.
    pub fn step(&mut self) -> Step {
        let dt = self.next_holding_time();
        if !dt.is_finite() {
            return Step { dt, bond: None };
        }
        let b = self.sample_bond();
        let bond = Bond::from_index(b, self.model.lattice.dim());
        self.execute(self.time + dt, bond, &mut []);
        Step { dt, bond: Some(bond) }
    }

    /// Runs until `t_end`, invoking observers at every event and at every
    /// sample time in `(now, t_end]` (a sample at the current time fires first).
    pub fn run_until(&mut self, t_end: f64, sample_times: &[f64], observers: &mut [&mut dyn Observer]) -> RunSummary {
        self.drive(t_end, sample_times, observers, |p| {
            let dt = p.next_holding_time();
            if !dt.is_finite() {
                return None;
            }
            let t = p.time + dt;
            if t > t_end {
                return None;
            }
            let b = p.sample_bond();
            Some((t, Bond::from_index(b, p.model.lattice.dim())))
        })
    }

    /// Replays recorded events through the observers.
    pub fn replay(
        &mut self,
        events: &[Event],
        t_end: f64,
        sample_times: &[f64],
        observers: &mut [&mut dyn Observer],
    ) -> RunSummary {
        let mut it = events.iter();
        self.drive(t_end, sample_times, observers, |_| {
            it.next().filter(|e| e.time <= t_end).map(|e| (e.time, e.bond))
        })
    }

    fn drive(
        &mut self,
        t_end: f64,
        sample_times: &[f64],
        observers: &mut [&mut dyn Observer],
        mut next: impl FnMut(&mut Self) -> Option<(f64, Bond)>,
    ) -> RunSummary {
        let start_events = self.events;
        let now = self.time;
        let mut samples = sample_times
            .iter()
            .copied()
            .filter(|&s| s >= now && s <= t_end)
            .peekable();
        for o in observers.iter_mut() {
            o.on_start(self);
        }
        while let Some((t, bond)) = next(self) {
            while let Some(s) = samples.next_if(|&s| s < t) {
                for o in observers.iter_mut() {
                    o.on_sample(self, s);
                }
            }
            self.execute(t, bond, observers);
        }
        for s in samples {
            for o in observers.iter_mut() {
                o.on_sample(self, s);
            }
        }
        self.time = self.time.max(t_end);
        for o in observers.iter_mut() {
            o.on_end(self, t_end);
        }
        RunSummary {
            events: self.events - start_events,
            final_time: self.time,
            final_density: self.cfg.density(),
        }
    }
}

struct Recorder {
    events: Vec<Event>,
}

impl Observer for Recorder {
    fn after_event(&mut self, _p: &ExclusionProcess, time: f64, bond: Bond) {
        self.events.push(Event { time, bond });
    }
}

/// Runs the process from `cfg0` up to `t_end` and records every event.
pub fn simulate(
    model: Arc<ExclusionModel>,
    cfg0: Configuration,
    t_end: f64,
    seed: u64,
    sample_times: &[f64],
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    if !(t_end >= 0.0) {
        return Err(Error::param(
            "T",
            format!("final time must be nonnegative, got {t_end}"),
        ));
    }
    let mut process = ExclusionProcess::new(model.clone(), cfg0.clone(), derive_seed(seed, stream::DYNAMICS, 0))?;
    let mut recorder = Recorder { events: Vec::new() };
    {
        let mut all: Vec<&mut dyn Observer> = Vec::with_capacity(observers.len() + 1);
        all.push(&mut recorder);
        for o in observers.iter_mut() {
            all.push(&mut **o);
        }
        process.run_until(t_end, sample_times, &mut all);
    }
    Ok(Trajectory::new(
        model,
        cfg0,
        recorder.events,
        t_end,
        process.configuration().clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sample_bernoulli;
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::WFunction;

    fn flat_model(d: usize, n: usize, family: RateFamily) -> Arc<ExclusionModel> {
        let field = sample_field(&EnvironmentSpec::constant(1.0), d, n).unwrap();
        let op = assemble(&WFunction::identity(d), &field).unwrap();
        Arc::new(ExclusionModel::new(&op, family))
    }

    #[test]
    fn sum_tree_sampling() {
        let t = SumTree::new(&[0.0, 1.0, 0.0, 2.0, 0.5]);
        assert_eq!(t.total(), 3.5);
        assert_eq!(t.find(0.0), 1);
        assert_eq!(t.find(0.999), 1);
        assert_eq!(t.find(1.0), 3);
        assert_eq!(t.find(3.2), 4);
    }

    #[test]
    fn degenerate_conductances_rejected() {
        let wf = WFunction::new(vec![crate::wfunc::AxisProfile::new(1e-310, vec![]).unwrap()]).unwrap();
        let op = assemble(&wf, &sample_field(&EnvironmentSpec::constant(1.0), 1, 8).unwrap()).unwrap();
        let m = Arc::new(ExclusionModel::new(&op, RateFamily::standard(0.0).unwrap()));
        let cfg = sample_bernoulli(0.5, m.lattice(), 1).unwrap();
        assert!(ExclusionProcess::new(m, cfg, 1).is_err());
    }

    #[test]
    fn full_lattice_has_no_events() {
        let m = flat_model(1, 8, RateFamily::standard(0.0).unwrap());
        let l = m.lattice();
        let mut p = ExclusionProcess::new(m, Configuration::full(l), 1).unwrap();
        let s = p.step();
        assert!(s.dt.is_infinite());
        assert!(s.bond.is_none());
        assert_eq!(p.run_until(5.0, &[], &mut []).events, 0);
    }

    #[test]
    fn single_particle_moves_to_a_neighbour() {
        let m = flat_model(1, 8, RateFamily::standard(0.0).unwrap());
        let l = m.lattice();
        let mut p = ExclusionProcess::new(m, Configuration::with_particles(l, &[0]), 3).unwrap();
        assert_eq!(p.active_bonds(), 2);
        p.step();
        let pos: Vec<usize> = (0..8).filter(|&s| p.configuration().get(s) == 1).collect();
        assert!(pos == vec![1] || pos == vec![7]);
    }

    #[test]
    fn incremental_rates_match_recomputation() {
        for family in [
            RateFamily::standard(0.7).unwrap(),
            RateFamily::extended(0.3, -0.2).unwrap(),
        ] {
            let m = flat_model(2, 6, family);
            let cfg = sample_bernoulli(0.4, m.lattice(), 5).unwrap();
            let particles = cfg.particles();
            let mut p = ExclusionProcess::new(m.clone(), cfg, 9).unwrap();
            for _ in 0..20_000 {
                p.step();
                assert_eq!(p.configuration().particles(), particles);
            }
            let occ = p.configuration().occupancy().to_vec();
            for b in 0..m.lattice().num_bonds() {
                assert_eq!(p.rate(b), m.rate(&occ, b));
            }
            assert!(p.resync() < 1e-9);
        }
    }

    #[test]
    fn zero_horizon_is_a_no_op() {
        let m = flat_model(1, 16, RateFamily::standard(0.0).unwrap());
        let cfg = sample_bernoulli(0.5, m.lattice(), 2).unwrap();
        let traj = simulate(m, cfg.clone(), 0.0, 4, &[], &mut []).unwrap();
        assert!(traj.events().is_empty());
        assert_eq!(traj.final_configuration(), &cfg);
    }
}
