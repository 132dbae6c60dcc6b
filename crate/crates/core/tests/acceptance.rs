//! Runs every acceptance criterion and prints one line per criterion.
//!
//! Pass criterion ids as arguments to run a subset.

use std::process::ExitCode;

use fluctlab::acceptance::{criteria, run_criterion};

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, _, _) in criteria() {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let outcome = run_criterion(id).expect("known criterion");
        println!("{outcome}");
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
