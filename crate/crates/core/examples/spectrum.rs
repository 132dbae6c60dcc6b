// Lowest eigenvalues of the generator with a membrane in `W`.

use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::operators::{assemble, eigendecompose};
use fluctlab::wfunc::{AxisProfile, WFunction};

pub fn run_example() -> fluctlab::Result<()> {
    let flat = assemble(
        &WFunction::identity(1),
        &sample_field(&EnvironmentSpec::constant(1.0), 1, 64)?,
    )?;
    let membrane = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.5, 2.0)])?])?;
    let walled = assemble(&membrane, &sample_field(&EnvironmentSpec::constant(1.0), 1, 64)?)?;

    let a = eigendecompose(&flat, 6)?;
    let b = eigendecompose(&walled, 6)?;
    println!("k  flat        membrane");
    for k in 0..6 {
        println!("{k}  {:>10.4}  {:>10.4}", a.alpha(k), b.alpha(k));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
