use super::TestFunction;
use crate::operators::{solve_resolvent, HomogenizedMatrix, LatticeOperator};
use crate::{Error, LatticeFunction, Result};

/// `G_N^λ`, the solution of `λG_N^λ − 𝕃_N G_N^λ = λG − ∇A∇_W G` with the
/// right-hand side built from the constant-coefficient operator on the same
/// lattice.
pub fn corrected_test_function(
    g: &TestFunction,
    lambda: f64,
    op: &LatticeOperator,
    a: &HomogenizedMatrix,
) -> Result<LatticeFunction> {
    if a.dim() != op.lattice().dim() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} entries on a {}-dimensional lattice",
            a.dim(),
            op.lattice().dim()
        )));
    }
    let gn = g.restrict(op.lattice());
    let op_a = op.with_coefficients(a.diag())?;
    let rhs = gn.map(|v| lambda * v).sub(&op_a.apply(&gn));
    solve_resolvent(op, lambda, &rhs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectedDiagnostics {
    pub n: usize,
    /// `‖G_N^λ − G‖_N`.
    pub l2_gap: f64,
    /// `|⟨−𝕃_N G_N^λ, G_N^λ⟩ − ⟨−∇A∇_W G, G⟩|`, the gap between the
    /// corrected and homogenized quadratic-variation densities.
    pub energy_gap: f64,
    /// `‖𝕃_N G_N^λ − ∇A∇_W G‖_N² = λ²‖G_N^λ − G‖_N²`.
    pub drift_residual: f64,
}

/// Distances between `G` and its corrected version on one lattice.
pub fn corrected_diagnostics(
    g: &TestFunction,
    lambda: f64,
    op: &LatticeOperator,
    a: &HomogenizedMatrix,
) -> Result<CorrectedDiagnostics> {
    let gl = corrected_test_function(g, lambda, op, a)?;
    let gn = g.restrict(op.lattice());
    let op_a = op.with_coefficients(a.diag())?;
    let diff = gl.sub(&gn);
    let residual = op.apply(&gl).sub(&op_a.apply(&gn));
    Ok(CorrectedDiagnostics {
        n: op.lattice().size(),
        l2_gap: diff.norm(),
        energy_gap: (op.energy(&gl) - op_a.energy(&gn)).abs(),
        drift_residual: residual.norm_sq(),
    })
}
