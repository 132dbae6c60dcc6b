// Density field, martingale and quadratic variation along one run.

use std::sync::Arc;

use fluctlab::dynamics::{sample_bernoulli, simulate, ExclusionModel, RateFamily};
use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::fluctuations::{martingale_path, qv_expectation, TestFunction};
use fluctlab::operators::assemble;
use fluctlab::wfunc::WFunction;

pub fn run_example() -> fluctlab::Result<()> {
    let (rho, t) = (0.5, 0.05);
    let op = assemble(
        &WFunction::identity(1),
        &sample_field(&EnvironmentSpec::constant(1.0), 1, 128)?,
    )?;
    let family = RateFamily::standard(0.5)?;
    let model = Arc::new(ExclusionModel::new(&op, family));
    let g = TestFunction::parse("c1", 1)?.restrict(op.lattice());

    let traj = simulate(model, sample_bernoulli(rho, op.lattice(), 5)?, t, 5, &[], &mut [])?;
    let times = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05];
    let path = martingale_path(&traj, &g, rho, &times)?;
    println!("t      Y         M         QV");
    for i in 0..times.len() {
        println!(
            "{:.2}  {:>8.4}  {:>8.4}  {:>8.4}",
            path.times[i], path.y[i], path.m[i], path.qv[i]
        );
    }
    println!("E[QV_t] = {:.4}", qv_expectation(&g, &op, rho, family, t)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
