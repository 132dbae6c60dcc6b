//! The discrete torus `T_N^d` and functions on it.

use crate::{Error, Result};

/// The discrete torus `{0, …, N-1}^d`. Sites are numbered with axis 0
/// varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    d: usize,
    n: usize,
    sites: usize,
}

impl Lattice {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if n == 0 {
            return Err(Error::param("N", "lattice size must be at least 1"));
        }
        let sites = (0..d)
            .try_fold(1usize, |acc, _| acc.checked_mul(n))
            .ok_or_else(|| Error::param("N", "N^d overflows"))?;
        Ok(Lattice { d, n, sites })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Side length `N`.
    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn num_sites(&self) -> usize {
        self.sites
    }

    /// Bonds are `(x, x + e_j)` for every site and axis, indexed `x·d + j`.
    #[inline]
    pub fn num_bonds(&self) -> usize {
        self.sites * self.d
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    #[inline]
    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.stride(axis)) % self.n
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.d).map(|k| self.coord(site, k)).collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(k, &c)| (c % self.n) * self.stride(k))
            .sum()
    }

    /// Site index from possibly negative coordinates, reduced mod `N`.
    pub fn site_wrapped(&self, coords: &[i64]) -> usize {
        let n = self.n as i64;
        coords
            .iter()
            .enumerate()
            .map(|(k, &c)| c.rem_euclid(n) as usize * self.stride(k))
            .sum()
    }

    /// `site + delta·e_axis` on the torus.
    #[inline]
    pub fn shift(&self, site: usize, axis: usize, delta: isize) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.n;
        let moved = (c as isize + delta).rem_euclid(self.n as isize) as usize;
        site + moved * stride - c * stride
    }

    /// Shift by an integer vector.
    pub fn translate(&self, site: usize, offset: &[i64]) -> usize {
        offset
            .iter()
            .enumerate()
            .fold(site, |s, (axis, &o)| self.shift(s, axis, o as isize))
    }

    /// Macroscopic position `x/N ∈ [0,1)^d`.
    pub fn point(&self, site: usize) -> Vec<f64> {
        (0..self.d)
            .map(|k| self.coord(site, k) as f64 / self.n as f64)
            .collect()
    }

    /// `N^{-d}`, the mass of one site under the normalized counting measure.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.sites as f64
    }
}

/// A real function on the sites of a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFunction {
    lattice: Lattice,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn zeros(lattice: Lattice) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: Lattice, value: f64) -> Self {
        LatticeFunction {
            lattice,
            values: vec![value; lattice.num_sites()],
        }
    }

    /// Restriction `x ↦ g(x/N)` of a continuum function.
    pub fn from_fn(lattice: Lattice, g: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..lattice.num_sites()).map(|s| g(&lattice.point(s))).collect();
        LatticeFunction { lattice, values }
    }

    pub fn from_values(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.num_sites() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a lattice with {} sites",
                values.len(),
                lattice.num_sites()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite value {v}")));
        }
        Ok(LatticeFunction { lattice, values })
    }

    #[inline]
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `⟨f, g⟩ = N^{-d} Σ_x f(x) g(x)`.
    pub fn inner(&self, other: &LatticeFunction) -> f64 {
        debug_assert_eq!(self.lattice, other.lattice);
        dot(&self.values, &other.values) * self.lattice.cell_volume()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// `‖f‖_N`, the ℓ² norm under the normalized counting measure.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> LatticeFunction {
        LatticeFunction {
            lattice: self.lattice,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, alpha: f64, other: &LatticeFunction) -> LatticeFunction {
        debug_assert_eq!(self.lattice, other.lattice);
        LatticeFunction {
            lattice: self.lattice,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &LatticeFunction) -> LatticeFunction {
        self.add_scaled(-1.0, other)
    }

    /// Mean value `N^{-d} Σ_x f(x)`.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.lattice.cell_volume()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_round_trip() {
        let l = Lattice::new(3, 5).unwrap();
        for s in 0..l.num_sites() {
            assert_eq!(l.site(&l.coords(s)), s);
        }
    }

    #[test]
    fn shifts_wrap_around() {
        let l = Lattice::new(2, 4).unwrap();
        let s = l.site(&[3, 0]);
        assert_eq!(l.coords(l.shift(s, 0, 1)), vec![0, 0]);
        assert_eq!(l.coords(l.shift(s, 1, -1)), vec![3, 3]);
        assert_eq!(l.translate(s, &[2, -5]), l.site(&[1, 3]));
        assert_eq!(l.site_wrapped(&[-1, 9]), l.site(&[3, 1]));
    }

    #[test]
    fn rejects_empty_lattices() {
        assert!(Lattice::new(0, 4).is_err());
        assert!(Lattice::new(1, 0).is_err());
    }

    #[test]
    fn normalized_inner_product() {
        let l = Lattice::new(1, 8).unwrap();
        let one = LatticeFunction::constant(l, 1.0);
        assert!((one.norm() - 1.0).abs() < 1e-15);
        let c = LatticeFunction::from_fn(l, |x| (2.0 * std::f64::consts::PI * x[0]).cos());
        assert!(c.inner(&one).abs() < 1e-15);
        assert!((c.norm_sq() - 0.5).abs() < 1e-15);
    }
}
