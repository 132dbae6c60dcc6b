// A single walker crossing a membrane.

use fluctlab::dynamics::random_walk_simulate;
use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::operators::assemble;
use fluctlab::wfunc::{AxisProfile, WFunction};

pub fn run_example() -> fluctlab::Result<()> {
    let n = 16;
    let wf = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.5, 0.5)])?])?;
    let op = assemble(&wf, &sample_field(&EnvironmentSpec::constant(1.0), 1, n)?)?;
    let path = random_walk_simulate(&op, 0, 2.0, 11)?;
    println!("{} jumps", path.jumps());
    for x in [3, 7, 11] {
        println!("bond {x}->{}: {} crossings", x + 1, path.crossings(x, 0));
    }
    let occ = path.occupation_times();
    println!("time left of the membrane: {:.3}", occ[..n / 2].iter().sum::<f64>());
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
