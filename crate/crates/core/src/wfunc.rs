//! Conductance profiles `W(x) = Σ_k W_k(x_k)`.
//!
//! Each `W_k` is affine plus finitely many positive jumps on `[0, 1)`,
//! extended periodically by `W_k(u + 1) = W_k(u) + P_k`. Jumps model
//! membranes: a bond whose cell contains a jump gets a large increment and
//! hence a small rate.

use crate::{Error, Lattice, LatticeFunction, Result};

/// One axis `W_k`: slope plus right-continuous jumps.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisProfile {
    slope: f64,
    /// `(location u ∈ [0,1), size s > 0)`, sorted by location.
    jumps: Vec<(f64, f64)>,
}

impl AxisProfile {
    pub fn new(slope: f64, mut jumps: Vec<(f64, f64)>) -> Result<Self> {
        if !(slope > 0.0 && slope.is_finite()) {
            return Err(Error::param("w.slope", format!("slope must be positive, got {slope}")));
        }
        for &(u, s) in &jumps {
            if !(0.0..1.0).contains(&u) {
                return Err(Error::param("w.jumps", format!("jump location {u} outside [0, 1)")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("w.jumps", format!("jump size must be positive, got {s}")));
            }
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(AxisProfile { slope, jumps })
    }

    /// `W_k(u) = u`.
    pub fn identity() -> Self {
        AxisProfile {
            slope: 1.0,
            jumps: Vec::new(),
        }
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    /// `P_k = W_k(1) − W_k(0)`.
    pub fn period_increment(&self) -> f64 {
        self.slope + self.jumps.iter().map(|j| j.1).sum::<f64>()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let whole = x.floor();
        let frac = x - whole;
        let jumped: f64 = self.jumps.iter().take_while(|j| j.0 <= frac).map(|j| j.1).sum();
        self.slope * frac + jumped + whole * self.period_increment()
    }

    /// Index of the cell `(c/N, (c+1)/N]` holding a jump at `u`.
    fn jump_cell(u: f64, n: usize) -> usize {
        let c = (u * n as f64).ceil() as i64 - 1;
        if c < 0 {
            n - 1
        } else {
            (c as usize).min(n - 1)
        }
    }

    /// Increments `W_k((c+1)/N) − W_k(c/N)` for every cell `c`.
    pub fn increments(&self, n: usize) -> Vec<f64> {
        let mut inc = vec![self.slope / n as f64; n];
        for &(u, s) in &self.jumps {
            inc[Self::jump_cell(u, n)] += s;
        }
        inc
    }
}

/// The separable profile `W = Σ_k W_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct WFunction {
    axes: Vec<AxisProfile>,
}

impl WFunction {
    pub fn new(axes: Vec<AxisProfile>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::param("w", "at least one axis is required"));
        }
        Ok(WFunction { axes })
    }

    /// `W(x) = Σ_k x_k`, the flat case.
    pub fn identity(d: usize) -> Self {
        WFunction {
            axes: vec![AxisProfile::identity(); d.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &AxisProfile {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[AxisProfile] {
        &self.axes
    }

    /// `W_k(x)` for any real `x`.
    pub fn eval_w(&self, k: usize, x: f64) -> f64 {
        self.axes[k].eval(x)
    }

    /// `ΔW_k = W_k((x_k+1)/N) − W_k(x_k/N)`.
    pub fn increment(&self, k: usize, n: usize, xk: usize) -> f64 {
        let p = &self.axes[k];
        let mut inc = p.slope / n as f64;
        for &(u, s) in &p.jumps {
            if AxisProfile::jump_cell(u, n) == xk {
                inc += s;
            }
        }
        inc
    }

    pub fn period_increment(&self, k: usize) -> f64 {
        self.axes[k].period_increment()
    }

    /// `N^{-(d-1)} Σ_x g(x) ΔW_j(x_j)`, the grid quadrature of `g` against
    /// `d(x^j ⊗ W_j)`.
    pub fn w_quadrature(&self, j: usize, g: &LatticeFunction) -> Result<f64> {
        let lattice = g.lattice();
        self.check_lattice(&lattice)?;
        let n = lattice.size();
        let inc = self.axes[j].increments(n);
        let sum: f64 = g
            .values()
            .iter()
            .enumerate()
            .map(|(s, v)| v * inc[lattice.coord(s, j)])
            .sum();
        Ok(sum / (n as f64).powi(lattice.dim() as i32 - 1))
    }

    pub(crate) fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if lattice.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "W has {} axes but the lattice has dimension {}",
                self.dim(),
                lattice.dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn membrane() -> WFunction {
        WFunction::new(vec![AxisProfile::new(1.0, vec![(0.5, 1.0)]).unwrap()]).unwrap()
    }

    #[test]
    fn identity_profile() {
        let w = WFunction::identity(1);
        assert_eq!(w.eval_w(0, 0.5), 0.5);
        for x in 0..10 {
            assert!((w.increment(0, 10, x) - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn jumps_are_right_continuous_and_periodic() {
        let w = membrane();
        assert_eq!(w.eval_w(0, 0.5), 1.5);
        assert_eq!(w.eval_w(0, 0.499), 0.499);
        assert_eq!(w.period_increment(0), 2.0);
        assert_eq!(w.eval_w(0, 1.25), 2.0 + 0.25);
        assert_eq!(w.eval_w(0, -0.75), -2.0 + 0.25);
    }

    #[test]
    fn jump_lands_in_cell_with_matching_right_endpoint() {
        let w = membrane();
        let two_point = w.eval_w(0, 0.5) - w.eval_w(0, 0.4);
        assert!((w.increment(0, 10, 4) - 1.1).abs() < 1e-12);
        assert!((w.increment(0, 10, 4) - two_point).abs() < 1e-12);
        assert!((w.increment(0, 10, 5) - 0.1).abs() < 1e-12);
        let total: f64 = (0..10).map(|x| w.increment(0, 10, x)).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jump_at_origin_belongs_to_last_cell() {
        let w = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.0, 3.0)]).unwrap()]).unwrap();
        assert!((w.increment(0, 4, 3) - 3.25).abs() < 1e-15);
        let two_point = w.eval_w(0, 1.0) - w.eval_w(0, 0.75);
        assert!((two_point - 3.25).abs() < 1e-15);
    }

    #[test]
    fn quadrature() {
        let l1 = Lattice::new(1, 64).unwrap();
        let one = LatticeFunction::constant(l1, 1.0);
        assert!((membrane().w_quadrature(0, &one).unwrap() - 2.0).abs() < 1e-12);

        let l2 = Lattice::new(2, 16).unwrap();
        let one2 = LatticeFunction::constant(l2, 1.0);
        let w2 = WFunction::identity(2);
        assert!((w2.w_quadrature(1, &one2).unwrap() - 1.0).abs() < 1e-12);

        let l = Lattice::new(1, 256).unwrap();
        let g = LatticeFunction::from_fn(l, |x| (2.0 * std::f64::consts::PI * x[0]).cos().powi(2));
        let q = WFunction::identity(1).w_quadrature(0, &g).unwrap();
        assert!((q - 0.5).abs() < 1e-3);
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(AxisProfile::new(0.0, vec![]).is_err());
        assert!(AxisProfile::new(1.0, vec![(1.0, 1.0)]).is_err());
        assert!(AxisProfile::new(1.0, vec![(0.2, -1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn increments_positive_and_telescoping(
            slope in 0.01f64..10.0,
            jumps in prop::collection::vec((0.0f64..1.0, 0.001f64..5.0), 0..6),
            n in 1usize..300,
        ) {
            let p = AxisProfile::new(slope, jumps).unwrap();
            let inc = p.increments(n);
            prop_assert!(inc.iter().all(|&v| v > 0.0));
            let total: f64 = inc.iter().sum();
            prop_assert!((total - p.period_increment()).abs() <= 1e-12 * p.period_increment());
        }

        #[test]
        fn strictly_increasing(
            slope in 0.01f64..10.0,
            jumps in prop::collection::vec((0.0f64..1.0, 0.001f64..5.0), 0..6),
            x in -3.0f64..3.0,
            dx in 1e-6f64..1.0,
        ) {
            let p = AxisProfile::new(slope, jumps).unwrap();
            prop_assert!(p.eval(x + dx) > p.eval(x));
        }
    }
}
