// The OU limit compared against itself and against a wrong mobility.

use fluctlab::dynamics::RateFamily;
use fluctlab::fluctuations::TestFunction;
use fluctlab::operators::HomogenizedMatrix;
use fluctlab::oulimit::{compare, ou_ensemble, time_correlation, OUParams};
use fluctlab::wfunc::WFunction;

pub fn run_example() -> fluctlab::Result<()> {
    let wf = WFunction::identity(1);
    let gs = vec![TestFunction::parse("c1", 1)?, TestFunction::parse("s2", 1)?];
    let times = [0.0, 0.01, 0.05];
    let params = OUParams::new(
        0.5,
        RateFamily::standard(0.0)?,
        &wf,
        HomogenizedMatrix::identity(1),
        256,
        16,
    )?;
    let samples = ou_ensemble(&params, &gs, &times, 2000, 9)?;

    for &t in &times {
        println!(
            "E[Y_0(c1) Y_t(c1)] at t = {t}: {:.4}",
            time_correlation(&params, &gs[0], t)?
        );
    }
    let report = compare(&samples, &params, &gs)?;
    println!("same limit: {} rows, passed = {}", report.rows.len(), report.passed());

    let faster = OUParams::new(
        0.5,
        RateFamily::standard(1.0)?,
        &wf,
        HomogenizedMatrix::identity(1),
        256,
        16,
    )?;
    let wrong = compare(&samples, &faster, &gs)?;
    println!(
        "wrong mobility: autocovariance max |z| = {:.1}",
        wrong.max_abs_z("autocovariance")
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> fluctlab::Result<()> {
    run_example()
}
