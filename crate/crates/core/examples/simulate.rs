// Exclusion dynamics on a random environment, with an event log replay.

use std::sync::Arc;

use fluctlab::dynamics::{read_event_log, sample_bernoulli, simulate, write_event_log, ExclusionModel, RateFamily};
use fluctlab::env::{sample_field, EnvironmentSpec};
use fluctlab::operators::assemble;
use fluctlab::wfunc::WFunction;

pub fn run_example() -> fluctlab::Result<()> {
    let spec = EnvironmentSpec::iid(vec![0.5, 1.0, 2.0], vec![0.25, 0.5, 0.25], 2.0, 3);
    let op = assemble(&WFunction::identity(2), &sample_field(&spec, 2, 16)?)?;
    let model = Arc::new(ExclusionModel::new(&op, RateFamily::standard(0.5)?));
    let cfg0 = sample_bernoulli(0.4, op.lattice(), 1)?;

    let traj = simulate(model, cfg0, 0.05, 42, &[], &mut [])?;
    println!(
        "{} events, {} particles, final time {}",
        traj.events().len(),
        traj.final_configuration().particles(),
        traj.final_time()
    );

    let mut log = Vec::new();
    write_event_log(traj.events(), &mut log)?;
    let events = read_event_log(log.as_slice())?;
    assert_eq!(events, traj.events());
    let (_, replayed) = traj.replay(&[], &mut [])?;
    assert_eq!(&replayed, traj.final_configuration());
    println!("event log: {} bytes, replay matches", log.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
