use std::sync::Arc;

use fluctlab::dynamics::{sample_bernoulli, simulate, ExclusionModel, RateFamily};
use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::fluctuations::{corrected_diagnostics, equivalence_gap, martingale_path, CylinderFunction, TestFunction};
use fluctlab::operators::{assemble, default_rhs_family, homogenize};
use fluctlab::wfunc::{AxisProfile, WFunction};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn martingale_starts_at_zero_and_qv_grows(b in -0.4f64..1.0, rho in 0.1f64..0.9, seed in any::<u64>()) {
        let wf = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.25, 0.5)]).unwrap()]).unwrap();
        let spec = EnvironmentSpec::iid(vec![0.5, 2.0], vec![0.5, 0.5], 2.0, seed);
        let op = assemble(&wf, &sample_field(&spec, 1, 32).unwrap()).unwrap();
        let model = Arc::new(ExclusionModel::new(&op, RateFamily::standard(b).unwrap()));
        let g = TestFunction::parse("s1", 1).unwrap().restrict(op.lattice());
        let traj = simulate(model, sample_bernoulli(rho, op.lattice(), seed).unwrap(), 0.05, seed, &[], &mut []).unwrap();
        let times: Vec<f64> = (0..=10).map(|i| 0.005 * i as f64).collect();
        let path = martingale_path(&traj, &g, rho, &times).unwrap();
        prop_assert_eq!(path.m[0], 0.0);
        prop_assert_eq!(path.qv[0], 0.0);
        prop_assert!(path.qv.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn canonical_gap_is_nonnegative_and_vanishes_at_the_edges(sites in 4usize..200) {
        let f = CylinderFunction::h1(1, 0);
        prop_assert!(equivalence_gap(&f, sites, 0).unwrap().abs() < 1e-15);
        prop_assert!(equivalence_gap(&f, sites, sites).unwrap().abs() < 1e-15);
        for k in [1, sites / 2, sites - 1] {
            prop_assert!(equivalence_gap(&f, sites, k).unwrap() >= 0.0);
        }
    }
}

#[test]
fn corrected_function_approaches_g() {
    let wf = WFunction::identity(1);
    let spec = EnvironmentSpec::periodic(vec![2], vec![1.0, 3.0], 3.0);
    let a = homogenize(&wf, &spec, 1.0, &default_rhs_family(1), &[256])
        .unwrap()
        .matrix;
    let g = TestFunction::parse("c1", 1).unwrap();
    let gaps: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let op = assemble(&wf, &sample_field(&spec, 1, n).unwrap()).unwrap();
            corrected_diagnostics(&g, 1.0, &op, &a).unwrap().l2_gap
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn corrected_gaps_vanish_in_two_dimensions() {
    let wf = WFunction::new(vec![
        AxisProfile::identity(),
        AxisProfile::new(1.0, vec![(0.3, 0.5)]).unwrap(),
    ])
    .unwrap();
    let spec = EnvironmentSpec::periodic(vec![2, 2], vec![1.0, 2.0, 2.0, 1.0], 2.0);
    let a = homogenize(&wf, &spec, 1.0, &default_rhs_family(2), &[32])
        .unwrap()
        .matrix;
    let g = TestFunction::parse("c1*s1@2", 2).unwrap();
    let diag: Vec<_> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let op = assemble(&wf, &sample_field(&spec, 2, n).unwrap()).unwrap();
            corrected_diagnostics(&g, 1.0, &op, &a).unwrap()
        })
        .collect();
    assert!(diag.windows(2).all(|w| w[1].l2_gap < w[0].l2_gap), "{diag:?}");
    assert!(diag.windows(2).all(|w| w[1].energy_gap < w[0].energy_gap), "{diag:?}");
}
