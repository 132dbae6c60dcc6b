// Boltzmann-Gibbs statistic and equivalence of ensembles.

use std::sync::Arc;

use fluctlab::dynamics::{sample_bernoulli, simulate, ExclusionModel, RateFamily};
use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::fluctuations::{bg_statistic, equivalence_of_ensembles_check, CylinderFunction, TestFunction};
use fluctlab::operators::assemble;
use fluctlab::wfunc::WFunction;
use fluctlab::Lattice;

pub fn run_example() -> fluctlab::Result<()> {
    let f = CylinderFunction::h1(1, 0);
    for n in [16, 32, 64] {
        let op = assemble(
            &WFunction::identity(1),
            &sample_field(&EnvironmentSpec::constant(1.0), 1, n)?,
        )?;
        let model = Arc::new(ExclusionModel::new(&op, RateFamily::standard(0.0)?));
        let g = TestFunction::parse("c1", 1)?.restrict(op.lattice());
        let mut sq = 0.0;
        let reps = 50;
        for r in 0..reps {
            let traj = simulate(
                model.clone(),
                sample_bernoulli(0.5, op.lattice(), r)?,
                0.05,
                r,
                &[],
                &mut [],
            )?;
            sq += bg_statistic(&traj, &g, &f, 0.5)?.powi(2);
        }
        let gap = equivalence_of_ensembles_check(&f, Lattice::new(1, n)?)?;
        println!("N = {n:>3}  E[Z²] ≈ {:.3e}  ensemble gap = {gap:.5}", sq / reps as f64);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
