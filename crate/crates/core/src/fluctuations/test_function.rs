use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::operators::LatticeOperator;
use crate::{Error, Lattice, LatticeFunction, Result};

type Callable = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A continuum test function `G` on the unit torus, evaluated on the
/// lattice at `x/N`.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    f: Callable,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("label", &self.label).finish()
    }
}

impl TestFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// `amp · cos(2πk x_axis)`.
    pub fn cosine(axis: usize, k: u32, amp: f64) -> Self {
        let w = 2.0 * PI * f64::from(k);
        Self::new(format!("{amp}cos{k}@{}", axis + 1), move |x| amp * (w * x[axis]).cos())
    }

    /// `amp · sin(2πk x_axis)`.
    pub fn sine(axis: usize, k: u32, amp: f64) -> Self {
        let w = 2.0 * PI * f64::from(k);
        Self::new(format!("{amp}sin{k}@{}", axis + 1), move |x| amp * (w * x[axis]).sin())
    }

    pub fn constant(value: f64) -> Self {
        Self::new(format!("{value}"), move |_| value)
    }

    /// Parses a label such as `c1`, `s2@2`, `one` or `c1*s1@2`.
    ///
    /// `cK@j` is `√2 cos(2πK x_j)` and `sK@j` is `√2 sin(2πK x_j)`, both of
    /// unit `L²` norm; the axis defaults to 1. Factors joined by `*` multiply.
    pub fn parse(label: &str, d: usize) -> Result<Self> {
        let factors = label
            .split('*')
            .map(|tok| parse_factor(tok.trim(), d))
            .collect::<Result<Vec<_>>>()?;
        let g = if factors.len() == 1 {
            factors.into_iter().next().expect("one factor")
        } else {
            Self::new("", move |x| factors.iter().map(|f| f.eval(x)).product())
        };
        Ok(g.with_label(label))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// `x ↦ G(x/N)`.
    pub fn restrict(&self, lattice: Lattice) -> LatticeFunction {
        LatticeFunction::from_fn(lattice, |x| self.eval(x))
    }

    /// `max_j sup_x |∂ᴺ_{W_j} G(x)|`; bounded uniformly in `N` for admissible `G`.
    pub fn max_w_gradient(&self, op: &LatticeOperator) -> f64 {
        let g = self.restrict(op.lattice());
        (0..op.lattice().dim())
            .map(|j| op.w_gradient(j, &g).sup_norm())
            .fold(0.0, f64::max)
    }
}

fn parse_factor(tok: &str, d: usize) -> Result<TestFunction> {
    let bad = || Error::Parse(format!("unrecognised test function '{tok}'"));
    if tok == "one" || tok == "1" {
        return Ok(TestFunction::constant(1.0));
    }
    let (head, axis) = match tok.split_once('@') {
        Some((h, a)) => (h, a.parse::<usize>().map_err(|_| bad())?),
        None => (tok, 1),
    };
    if axis == 0 || axis > d {
        return Err(Error::Parse(format!("axis {axis} out of range in '{tok}' (d = {d})")));
    }
    let mut chars = head.chars();
    let kind = chars.next().ok_or_else(bad)?;
    let k: u32 = chars.as_str().parse().map_err(|_| bad())?;
    if k == 0 {
        return Err(bad());
    }
    match kind {
        'c' => Ok(TestFunction::cosine(axis - 1, k, SQRT_2)),
        's' => Ok(TestFunction::sine(axis - 1, k, SQRT_2)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::WFunction;

    #[test]
    fn parsed_labels() {
        let g = TestFunction::parse("c1", 1).unwrap();
        assert_eq!(g.label(), "c1");
        assert!((g.eval(&[0.0]) - SQRT_2).abs() < 1e-15);
        let h = TestFunction::parse("s1@2", 2).unwrap();
        assert!((h.eval(&[0.0, 0.25]) - SQRT_2).abs() < 1e-15);
        let p = TestFunction::parse("c1*s1@2", 2).unwrap();
        assert!((p.eval(&[0.0, 0.25]) - 2.0).abs() < 1e-14);
        assert_eq!(TestFunction::parse("one", 3).unwrap().eval(&[0.3, 0.1, 0.2]), 1.0);
        for bad in ["x1", "c", "c0", "c1@3", "c1@0", "cx"] {
            assert!(TestFunction::parse(bad, 2).is_err(), "{bad}");
        }
    }

    #[test]
    fn unit_norm_on_the_grid() {
        let l = Lattice::new(1, 64).unwrap();
        for label in ["c1", "s1", "c3"] {
            let g = TestFunction::parse(label, 1).unwrap().restrict(l);
            assert!((g.norm_sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_bound_is_uniform() {
        let g = TestFunction::parse("c1", 1).unwrap();
        let spec = EnvironmentSpec::constant(1.0);
        let bound = 2.0 * PI * SQRT_2;
        for n in [16, 64, 256] {
            let op = assemble(&WFunction::identity(1), &sample_field(&spec, 1, n).unwrap()).unwrap();
            let m = g.max_w_gradient(&op);
            assert!(m <= bound * (1.0 + 1e-12) && m > 0.9 * bound);
        }
    }
}
