use super::process::ExclusionModel;
use super::Configuration;
use crate::operators::LatticeOperator;
use crate::{Error, Lattice, Result};

/// The occupation-dependent factor multiplying `N²ξ` on a bond.
///
/// Both families depend only on sites outside the bond, which keeps every
/// Bernoulli product measure reversible, and both are gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFamily {
    /// `c = 1 + b{η(x−e_j) + η(x+2e_j)}`, giving `φ(ρ) = ρ + bρ²`.
    Standard { b: f64 },
    /// `ĉ = 1 + a{η(x−e_j) + η(x+2e_j)}
    ///      + b{η(x−2e_j)η(x−e_j) + η(x−e_j)η(x+2e_j) + η(x+2e_j)η(x+3e_j)}`,
    /// giving `φ(ρ) = ρ + aρ² + bρ³`.
    Extended { a: f64, b: f64 },
}

impl RateFamily {
    pub fn standard(b: f64) -> Result<Self> {
        if !(b > -0.5 && b.is_finite()) {
            return Err(Error::param("b", format!("need b > -1/2, got {b}")));
        }
        Ok(RateFamily::Standard { b })
    }

    pub fn extended(a: f64, b: f64) -> Result<Self> {
        if !(1.0 + 2.0 * a + 3.0 * b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::param(
                "a, b",
                format!("need 1 + 2a + 3b > 0, got a = {a}, b = {b}"),
            ));
        }
        let family = RateFamily::Extended { a, b };
        // Every local pattern of the four outer sites must give a positive rate.
        for pattern in 0u8..16 {
            let bits = [pattern & 1, (pattern >> 1) & 1, (pattern >> 2) & 1, (pattern >> 3) & 1];
            let c = family.factor_from_window(bits[0], bits[1], bits[2], bits[3]);
            if !(c > 0.0) {
                return Err(Error::param(
                    "a, b",
                    format!("rate factor {c} ≤ 0 for pattern {bits:?}"),
                ));
            }
        }
        Ok(family)
    }

    /// Factor from `(η(x−2e), η(x−e), η(x+2e), η(x+3e))`.
    #[inline]
    fn factor_from_window(&self, m2: u8, m1: u8, p2: u8, p3: u8) -> f64 {
        match *self {
            RateFamily::Standard { b } => 1.0 + b * f64::from(m1 + p2),
            RateFamily::Extended { a, b } => 1.0 + a * f64::from(m1 + p2) + b * f64::from(m2 * m1 + m1 * p2 + p2 * p3),
        }
    }

    /// Rate factor of bond `(x, x+e_axis)` in configuration `occ`.
    #[inline]
    pub(crate) fn factor(&self, lattice: &Lattice, occ: &[u8], x: usize, axis: usize) -> f64 {
        let at = |k: isize| occ[lattice.shift(x, axis, k)];
        match self {
            RateFamily::Standard { b } => 1.0 + b * f64::from(at(-1) + at(2)),
            RateFamily::Extended { .. } => self.factor_from_window(at(-2), at(-1), at(2), at(3)),
        }
    }

    /// Offsets along the bond axis, relative to `x`, that the rate reads.
    pub fn window(&self) -> (isize, isize) {
        match self {
            RateFamily::Standard { .. } => (-1, 2),
            RateFamily::Extended { .. } => (-2, 3),
        }
    }

    /// `φ′(ρ)`, which also equals `E_{ν_ρ}[c]`.
    pub fn phi_prime(&self, rho: f64) -> f64 {
        match *self {
            RateFamily::Standard { b } => 1.0 + 2.0 * b * rho,
            RateFamily::Extended { a, b } => 1.0 + 2.0 * a * rho + 3.0 * b * rho * rho,
        }
    }
}

fn check_site(cfg: &Configuration, op: &LatticeOperator, x: usize, j: usize) -> Result<()> {
    if cfg.lattice() != op.lattice() {
        return Err(Error::DimensionMismatch(
            "configuration and operator lattices differ".into(),
        ));
    }
    if x >= cfg.lattice().num_sites() || j >= cfg.lattice().dim() {
        return Err(Error::param("bond", format!("no bond ({x}, axis {j})")));
    }
    Ok(())
}

/// `N²ξ_{x,x+e_j}(1 + b{η(x−e_j) + η(x+2e_j)})`.
///
/// This is the rate the exchange across the bond would have; it does not
/// look at `η(x)` or `η(x+e_j)`.
pub fn exchange_rate(cfg: &Configuration, op: &LatticeOperator, b: f64, x: usize, j: usize) -> Result<f64> {
    check_site(cfg, op, x, j)?;
    let family = RateFamily::standard(b)?;
    let lattice = cfg.lattice();
    Ok(op.conductance(x * lattice.dim() + j) * family.factor(&lattice, cfg.occupancy(), x, j))
}

/// `N²ξ_{x,x+e_j} ĉ_{x,x+e_j}(η)` for the cubic family.
pub fn extended_rates(
    cfg: &Configuration,
    op: &LatticeOperator,
    x: usize,
    j: usize,
    a_coef: f64,
    b_coef: f64,
) -> Result<f64> {
    check_site(cfg, op, x, j)?;
    let family = RateFamily::extended(a_coef, b_coef)?;
    let lattice = cfg.lattice();
    Ok(op.conductance(x * lattice.dim() + j) * family.factor(&lattice, cfg.occupancy(), x, j))
}

/// Relative detailed-balance residual
/// `|ν_ρ(η) r(η → ση) − ν_ρ(ση) r(ση → η)| / (ν_ρ(η) r(η → ση))`
/// on an active bond.
pub fn detailed_balance_check(
    cfg: &Configuration,
    model: &ExclusionModel,
    rho: f64,
    x: usize,
    j: usize,
) -> Result<f64> {
    let lattice = model.lattice();
    if cfg.lattice() != lattice {
        return Err(Error::DimensionMismatch(
            "configuration and model lattices differ".into(),
        ));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param("rho", "detailed balance needs 0 < ρ < 1"));
    }
    let y = lattice.shift(x, j, 1);
    if cfg.get(x) == cfg.get(y) {
        return Err(Error::param("bond", "detailed balance is checked on active bonds only"));
    }
    let bond = x * lattice.dim() + j;
    let swapped = cfg.exchanged(x, y);
    let forward = model.rate(cfg.occupancy(), bond);
    let backward = model.rate(swapped.occupancy(), bond);
    let log_nu = |c: &Configuration| {
        let k = c.particles() as f64;
        k * rho.ln() + (lattice.num_sites() as f64 - k) * (1.0 - rho).ln()
    };
    let ratio = (log_nu(&swapped) - log_nu(cfg)).exp();
    Ok((forward - ratio * backward).abs() / forward)
}
