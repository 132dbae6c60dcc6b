//! The discrete operator `𝕃_N = ∇ᴺAᴺ∇ᴺ_W` and everything built on it:
//! resolvent solves, spectra, ladder norms and numerical homogenization.

mod eigen;
mod homogenize;
mod operator;
mod solver;

pub use eigen::{eigendecompose, sobolev_norm, w_ladder_norm, EigenBasis};
pub use homogenize::{
    default_rhs_family, energy_convergence, fit_homogenized, homogenize, EnergyReport, EnergyRow, HomogenizationFit,
    HomogenizationReport, HomogenizedMatrix,
};
pub use operator::{assemble, CsrMatrix, LatticeOperator};
pub use solver::{solve_resolvent, solve_resolvent_with_report, SolveReport};
