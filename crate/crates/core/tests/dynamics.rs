use std::sync::Arc;

use fluctlab::dynamics::{
    detailed_balance_check, sample_bernoulli, simulate, Configuration, ExclusionModel, ExclusionProcess, Observer,
    RateFamily,
};
use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::operators::assemble;
use fluctlab::wfunc::{AxisProfile, WFunction};
use proptest::prelude::*;

fn model(d: usize, n: usize, family: RateFamily, seed: u64) -> Arc<ExclusionModel> {
    let axes = (0..d)
        .map(|_| AxisProfile::new(1.0, vec![(0.5, 1.0)]).unwrap())
        .collect();
    let spec = EnvironmentSpec::iid(vec![0.5, 2.0], vec![0.5, 0.5], 2.0, seed);
    let op = assemble(&WFunction::new(axes).unwrap(), &sample_field(&spec, d, n).unwrap()).unwrap();
    Arc::new(ExclusionModel::new(&op, family))
}

fn family(extended: bool, a: f64, b: f64) -> RateFamily {
    if extended {
        RateFamily::extended(a, b).unwrap_or(RateFamily::extended(0.1, 0.1).unwrap())
    } else {
        RateFamily::standard(b).unwrap_or(RateFamily::standard(0.0).unwrap())
    }
}

/// Checks every event against the state just before it.
struct Audit {
    particles: usize,
    before: Vec<u8>,
    violations: usize,
}

impl Observer for Audit {
    fn before_event(&mut self, p: &ExclusionProcess, _t: f64, bond: fluctlab::dynamics::Bond) {
        let lattice = p.lattice();
        let occ = p.configuration().occupancy();
        if occ[bond.site] == occ[lattice.shift(bond.site, bond.axis, 1)] {
            self.violations += 1;
        }
        self.before = occ.to_vec();
    }

    fn after_event(&mut self, p: &ExclusionProcess, _t: f64, _bond: fluctlab::dynamics::Bond) {
        if p.configuration().particles() != self.particles {
            self.violations += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn detailed_balance_is_exact(
        extended in any::<bool>(),
        a in -0.3f64..1.0,
        b in -0.3f64..1.0,
        rho in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let m = model(2, 8, family(extended, a, b), seed);
        let cfg = sample_bernoulli(0.5, m.lattice(), seed).unwrap();
        for x in 0..m.lattice().num_sites() {
            for j in 0..2 {
                if cfg.get(x) != cfg.get(m.lattice().shift(x, j, 1)) {
                    prop_assert_eq!(detailed_balance_check(&cfg, &m, rho, x, j).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn phi_prime_is_positive(extended in any::<bool>(), a in -0.5f64..2.0, b in -0.5f64..2.0, rho in 0.0f64..=1.0) {
        let f = if extended { RateFamily::extended(a, b) } else { RateFamily::standard(b) };
        if let Ok(f) = f {
            prop_assert!(f.phi_prime(rho) > 0.0);
        }
    }

    #[test]
    fn events_conserve_particles_and_use_active_bonds(
        d in 1usize..=2,
        extended in any::<bool>(),
        rho in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let m = model(d, if d == 1 { 32 } else { 8 }, family(extended, 0.3, 0.2), seed);
        let cfg = sample_bernoulli(rho, m.lattice(), seed).unwrap();
        let mut audit = Audit { particles: cfg.particles(), before: Vec::new(), violations: 0 };
        let traj = simulate(m, cfg, 0.2, seed, &[], &mut [&mut audit]).unwrap();
        prop_assert_eq!(audit.violations, 0);
        prop_assert!(traj.events().windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn incremental_total_matches_recomputation(extended in any::<bool>(), seed in any::<u64>()) {
        let m = model(2, 10, family(extended, 0.4, -0.1), seed);
        let cfg = sample_bernoulli(0.4, m.lattice(), seed).unwrap();
        let mut p = ExclusionProcess::new(m, cfg, seed).unwrap();
        for _ in 0..2000 {
            p.step();
        }
        prop_assert!(p.resync() <= 1e-9);
    }
}

#[test]
fn same_seed_gives_identical_event_lists() {
    let m = model(1, 64, RateFamily::standard(0.5).unwrap(), 1);
    let cfg = sample_bernoulli(0.3, m.lattice(), 2).unwrap();
    let a = simulate(m.clone(), cfg.clone(), 0.5, 7, &[], &mut []).unwrap();
    let b = simulate(m.clone(), cfg.clone(), 0.5, 7, &[], &mut []).unwrap();
    let c = simulate(m, cfg, 0.5, 8, &[], &mut []).unwrap();
    assert_eq!(a.events(), b.events());
    assert_ne!(a.events(), c.events());
}

#[test]
fn empty_and_full_lattices_are_frozen() {
    let m = model(2, 6, RateFamily::standard(0.2).unwrap(), 1);
    for cfg in [Configuration::empty(m.lattice()), Configuration::full(m.lattice())] {
        let traj = simulate(m.clone(), cfg.clone(), 1.0, 3, &[], &mut []).unwrap();
        assert!(traj.events().is_empty());
        assert_eq!(traj.final_configuration(), &cfg);
    }
}
