//! Density fluctuation fields and the martingales built on them.
//!
//! Test functions are evaluated at `x/N`. Every observer integrates
//! piecewise-constant rates exactly between events.

mod boltzmann;
mod corrected;
mod field;
mod martingale;
mod test_function;

pub use boltzmann::{
    bg_statistic, boltzmann_gibbs_replacement_gap, equivalence_gap, equivalence_of_ensembles_check, replacement_terms,
    BgObserver, CylinderFunction,
};
pub use corrected::{corrected_diagnostics, corrected_test_function, CorrectedDiagnostics};
pub use field::{field_value, FieldObserver, FieldSeries};
pub use martingale::{field_at, martingale_path, qv_expectation, MartingaleObserver, MartingalePath};
pub use test_function::TestFunction;
