use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::operators::{assemble, eigendecompose, solve_resolvent, LatticeOperator};
use fluctlab::wfunc::{AxisProfile, WFunction};
use fluctlab::LatticeFunction;
use proptest::prelude::*;

fn operator(d: usize, n: usize, seed: u64, jump: f64) -> LatticeOperator {
    let axes = (0..d)
        .map(|_| AxisProfile::new(1.0, vec![(0.37, jump)]).unwrap())
        .collect();
    let spec = EnvironmentSpec::iid(vec![0.5, 1.0, 2.0], vec![0.3, 0.4, 0.3], 2.0, seed);
    assemble(&WFunction::new(axes).unwrap(), &sample_field(&spec, d, n).unwrap()).unwrap()
}

fn function(op: &LatticeOperator, vals: &[f64]) -> LatticeFunction {
    let m = op.lattice().num_sites();
    LatticeFunction::from_values(
        op.lattice(),
        (0..m).map(|i| vals[i % vals.len()] * (1.0 + i as f64).sin()).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_and_nonpositive(
        d in 1usize..=2,
        seed in any::<u64>(),
        jump in 0.0f64..3.0,
        a in prop::collection::vec(-1.0f64..1.0, 7),
        b in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let op = operator(d, if d == 1 { 40 } else { 9 }, seed, jump);
        let (f, g) = (function(&op, &a), function(&op, &b));
        let (lf, lg) = (op.apply(&f), op.apply(&g));
        let scale = lf.norm() * g.norm() + f.norm() * lg.norm() + 1e-300;
        prop_assert!((f.inner(&lg) - lf.inner(&g)).abs() <= 1e-10 * scale.max(1.0));
        prop_assert!(-f.inner(&lf) >= -1e-12 * scale.max(1.0));
    }

    #[test]
    fn rate_form_equals_difference_form(
        d in 1usize..=3,
        seed in any::<u64>(),
        jump in 0.0f64..5.0,
        a in prop::collection::vec(-1.0f64..1.0, 11),
    ) {
        let n = [0, 32, 8, 4][d];
        let op = operator(d, n, seed, jump);
        let f = function(&op, &a);
        let (r, q) = (op.apply(&f), op.apply_difference_form(&f));
        prop_assert!(r.sub(&q).sup_norm() <= 1e-10 * r.sup_norm().max(1e-300));
    }

    #[test]
    fn resolvent_solves_the_equation(seed in any::<u64>(), lambda in 0.1f64..10.0, jump in 0.0f64..3.0) {
        let op = operator(2, 8, seed, jump);
        let f = function(&op, &[1.0, -0.3, 0.7]);
        let u = solve_resolvent(&op, lambda, &f).unwrap();
        let residual = u.map(|v| lambda * v).sub(&op.apply(&u)).sub(&f);
        prop_assert!(residual.sup_norm() <= 1e-8 * f.sup_norm());
    }
}

#[test]
fn eigenbasis_is_orthonormal_with_a_zero_mode() {
    for (d, n) in [(1, 40), (2, 12), (1, 1200)] {
        let op = operator(d, n, 3, 1.5);
        let basis = eigendecompose(&op, 8).unwrap();
        assert!(basis.alpha(0).abs() < 1e-8, "α_1 = {}", basis.alpha(0));
        assert!(basis.alphas().windows(2).all(|w| w[0] <= w[1]));
        let v0 = basis.vector(0);
        assert!(v0.values().iter().all(|&x| (x - v0.values()[0]).abs() < 1e-8));
        for i in 0..8 {
            let vi = basis.vector(i);
            let residual = op.apply(&vi).add_scaled(basis.alpha(i), &vi);
            assert!(
                residual.norm() <= 1e-8 * basis.alpha(i).max(1.0),
                "residual {}",
                residual.norm()
            );
            for j in 0..8 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (vi.inner(&basis.vector(j)) - expected).abs() < 1e-8,
                    "({d},{n}) <φ{i}, φ{j}>"
                );
            }
        }
    }
}
