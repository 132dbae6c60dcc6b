// Effective coefficient of a random conductance field.

use fluctlab::env::EnvironmentSpec;
use fluctlab::operators::{default_rhs_family, homogenize};
use fluctlab::wfunc::WFunction;

pub fn run_example() -> fluctlab::Result<()> {
    let spec = EnvironmentSpec::iid(vec![1.0, 2.0], vec![0.5, 0.5], 2.0, 7);
    let report = homogenize(
        &WFunction::identity(1),
        &spec,
        1.0,
        &default_rhs_family(1),
        &[64, 128, 256],
    )?;
    for fit in &report.fits {
        println!(
            "N = {:>4}  a_eff = {:.5}  residual = {:.2e}",
            fit.n,
            fit.matrix.get(0),
            fit.relative_residual
        );
    }
    println!("harmonic mean 4/3 = {:.5}", 4.0 / 3.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
