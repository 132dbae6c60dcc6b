//! Stationary random coefficient fields `a_j(x)`.
//!
//! The abstract environment is realized by a counter-based hash keyed on
//! `(seed, axis, integer coordinates)`, so the value at a lattice point does
//! not depend on the order in which the field is built, and shifting the
//! field is an exact index permutation.

use crate::rng::{hash_words, stream, unit_f64};
use crate::{Error, Lattice, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum EnvironmentKind {
    /// `a_j(x) = value` everywhere.
    Constant { value: f64 },
    /// Independent draws from a finite distribution; each axis has its own stream.
    Iid { values: Vec<f64>, probs: Vec<f64> },
    /// `a_j(x) = table[x mod period]`, the same table on every axis. The
    /// table is laid out with axis 0 varying fastest.
    Periodic { period: Vec<usize>, table: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    /// Ellipticity bound `θ ≥ 1`.
    pub theta: f64,
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn constant(value: f64) -> Self {
        EnvironmentSpec {
            kind: EnvironmentKind::Constant { value },
            theta: value.max(1.0 / value).max(1.0),
            seed: 0,
        }
    }

    pub fn iid(values: Vec<f64>, probs: Vec<f64>, theta: f64, seed: u64) -> Self {
        EnvironmentSpec {
            kind: EnvironmentKind::Iid { values, probs },
            theta,
            seed,
        }
    }

    pub fn periodic(period: Vec<usize>, table: Vec<f64>, theta: f64) -> Self {
        EnvironmentSpec {
            kind: EnvironmentKind::Periodic { period, table },
            theta,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.theta;
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::param("env.theta", format!("θ must be ≥ 1, got {theta}")));
        }
        let check = |v: f64| -> Result<()> {
            // A relative slack absorbs the rounding in 1/θ.
            let (lo, hi) = (1.0 / theta, theta);
            if v.is_finite() && v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12) {
                Ok(())
            } else {
                Err(Error::Ellipticity { value: v, lo, hi })
            }
        };
        match &self.kind {
            EnvironmentKind::Constant { value } => check(*value),
            EnvironmentKind::Iid { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::param(
                        "env.probs",
                        "values and probs must be non-empty and of equal length",
                    ));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) {
                    return Err(Error::param("env.probs", "probabilities must be nonnegative"));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::param("env.probs", format!("probabilities sum to {total}")));
                }
                values.iter().try_for_each(|&v| check(v))
            }
            EnvironmentKind::Periodic { period, table } => {
                if period.is_empty() || period.contains(&0) {
                    return Err(Error::param("env.period", "periods must be positive"));
                }
                if table.len() != period.iter().product::<usize>() {
                    return Err(Error::param(
                        "env.table",
                        format!(
                            "table has {} entries, period needs {}",
                            table.len(),
                            period.iter().product::<usize>()
                        ),
                    ));
                }
                table.iter().try_for_each(|&v| check(v))
            }
        }
    }

    /// Coefficient `a_j` at integer point `z ∈ ℤ^d`.
    fn value_at(&self, axis: usize, z: &[i64]) -> f64 {
        match &self.kind {
            EnvironmentKind::Constant { value } => *value,
            EnvironmentKind::Iid { values, probs } => {
                let mut words = Vec::with_capacity(z.len() + 3);
                words.extend([self.seed, stream::ENVIRONMENT, axis as u64]);
                words.extend(z.iter().map(|&c| c as u64));
                let u = unit_f64(hash_words(&words));
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
            EnvironmentKind::Periodic { period, table } => {
                let mut idx = 0;
                let mut stride = 1;
                for (k, &c) in z.iter().enumerate() {
                    let p = period[k.min(period.len() - 1)];
                    idx += c.rem_euclid(p as i64) as usize * stride;
                    stride *= p;
                }
                table[idx % table.len()]
            }
        }
    }
}

/// A realized field `a_j(x)` on `T_N^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentField {
    lattice: Lattice,
    theta: f64,
    /// `coef[j][x]`.
    coef: Vec<Vec<f64>>,
}

impl EnvironmentField {
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn get(&self, axis: usize, site: usize) -> f64 {
        self.coef[axis][site]
    }

    pub fn axis_values(&self, axis: usize) -> &[f64] {
        &self.coef[axis]
    }

    /// Constant coefficient `a_j` on axis `j`, e.g. a homogenized matrix.
    pub fn constant_per_axis(lattice: Lattice, diag: &[f64]) -> Result<Self> {
        if diag.len() != lattice.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for dimension {}",
                diag.len(),
                lattice.dim()
            )));
        }
        if let Some(&v) = diag.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::param("a", format!("coefficients must be positive, got {v}")));
        }
        let theta = diag.iter().fold(1.0f64, |t, &v| t.max(v).max(1.0 / v));
        Ok(EnvironmentField {
            lattice,
            theta,
            coef: diag.iter().map(|&v| vec![v; lattice.num_sites()]).collect(),
        })
    }

    /// Whether every axis carries a single value.
    pub fn is_constant_per_axis(&self) -> bool {
        self.coef.iter().all(|c| c.iter().all(|&v| v == c[0]))
    }

    /// Harmonic mean of `a_j` over the lattice.
    pub fn harmonic_mean(&self, axis: usize) -> f64 {
        let c = &self.coef[axis];
        c.len() as f64 / c.iter().map(|v| 1.0 / v).sum::<f64>()
    }

    /// The field `x ↦ a_j(x + y)`.
    pub fn shift_field(&self, y: &[i64]) -> EnvironmentField {
        let l = self.lattice;
        let coef = self
            .coef
            .iter()
            .map(|c| (0..l.num_sites()).map(|s| c[l.translate(s, y)]).collect())
            .collect();
        EnvironmentField {
            lattice: l,
            theta: self.theta,
            coef,
        }
    }
}

/// Samples `a_j(x)` for every axis and site of `T_N^d`.
pub fn sample_field(spec: &EnvironmentSpec, d: usize, n: usize) -> Result<EnvironmentField> {
    if n < 2 {
        return Err(Error::param("N", "environment fields need N ≥ 2"));
    }
    spec.validate()?;
    let lattice = Lattice::new(d, n)?;
    let coef = (0..d)
        .map(|j| {
            (0..lattice.num_sites())
                .map(|s| {
                    let z: Vec<i64> = lattice.coords(s).into_iter().map(|c| c as i64).collect();
                    spec.value_at(j, &z)
                })
                .collect()
        })
        .collect();
    Ok(EnvironmentField {
        lattice,
        theta: spec.theta,
        coef,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_field() {
        let f = sample_field(&EnvironmentSpec::constant(1.0), 2, 8).unwrap();
        assert!((0..2).all(|j| f.axis_values(j).iter().all(|&v| v == 1.0)));
        assert!(f.is_constant_per_axis());
        assert_eq!(f.shift_field(&[3, -1]), f);
    }

    #[test]
    fn periodic_table_lookup_and_shift() {
        let spec = EnvironmentSpec::periodic(vec![2], vec![1.0, 3.0], 3.0);
        let f = sample_field(&spec, 1, 8).unwrap();
        assert_eq!(f.axis_values(0), &[1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0]);
        let g = f.shift_field(&[1]);
        assert_eq!(g.axis_values(0), &[3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0]);
        assert_eq!(f.shift_field(&[0]), f);
        assert!((f.harmonic_mean(0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn iid_frequencies_within_binomial_band() {
        let spec = EnvironmentSpec::iid(vec![1.0, 2.0], vec![0.5, 0.5], 2.0, 17);
        let f = sample_field(&spec, 1, 4096).unwrap();
        let vals = f.axis_values(0);
        assert!(vals.iter().all(|&v| v == 1.0 || v == 2.0));
        let ones = vals.iter().filter(|&&v| v == 1.0).count() as f64;
        let sigma = (4096.0 * 0.25f64).sqrt();
        assert!((ones - 2048.0).abs() <= 3.0 * sigma, "ones = {ones}");
    }

    #[test]
    fn iid_axes_use_independent_streams() {
        let spec = EnvironmentSpec::iid(vec![1.0, 2.0], vec![0.5, 0.5], 2.0, 3);
        let f = sample_field(&spec, 2, 16).unwrap();
        assert_ne!(f.axis_values(0), f.axis_values(1));
    }

    #[test]
    fn same_point_same_value_across_lattice_sizes() {
        let spec = EnvironmentSpec::iid(vec![1.0, 2.0, 3.0], vec![0.2, 0.3, 0.5], 3.0, 99);
        let small = sample_field(&spec, 1, 16).unwrap();
        let large = sample_field(&spec, 1, 64).unwrap();
        assert_eq!(small.axis_values(0), &large.axis_values(0)[..16]);
    }

    #[test]
    fn support_outside_ellipticity_rejected() {
        let spec = EnvironmentSpec::iid(vec![0.1, 2.0], vec![0.5, 0.5], 2.0, 0);
        assert!(matches!(sample_field(&spec, 1, 8), Err(Error::Ellipticity { .. })));
        let spec = EnvironmentSpec::periodic(vec![2], vec![1.0, 3.0], 2.0);
        assert!(sample_field(&spec, 1, 8).is_err());
        let spec = EnvironmentSpec::iid(vec![1.0, 2.0], vec![0.5, 0.6], 2.0, 0);
        assert!(sample_field(&spec, 1, 8).is_err());
    }

    proptest! {
        #[test]
        fn ellipticity_and_shift_group_law(
            seed in any::<u64>(),
            y in prop::collection::vec(-20i64..20, 2),
            z in prop::collection::vec(-20i64..20, 2),
        ) {
            let spec = EnvironmentSpec::iid(vec![0.5, 1.0, 2.0], vec![0.3, 0.3, 0.4], 2.0, seed);
            let f = sample_field(&spec, 2, 8).unwrap();
            for j in 0..2 {
                prop_assert!(f.axis_values(j).iter().all(|&v| (0.5..=2.0).contains(&v)));
            }
            let yz: Vec<i64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
            prop_assert_eq!(f.shift_field(&y).shift_field(&z), f.shift_field(&yz));
        }

        #[test]
        fn reproducible(seed in any::<u64>()) {
            let spec = EnvironmentSpec::iid(vec![1.0, 2.0], vec![0.5, 0.5], 2.0, seed);
            prop_assert_eq!(sample_field(&spec, 2, 6).unwrap(), sample_field(&spec, 2, 6).unwrap());
        }
    }
}
