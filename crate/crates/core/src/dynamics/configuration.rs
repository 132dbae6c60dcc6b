use rand::Rng;

use crate::rng::{chacha, derive_seed, stream};
use crate::{Error, Lattice, Result};

/// Occupation variables `η(x) ∈ {0, 1}` on `T_N^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    lattice: Lattice,
    occ: Vec<u8>,
}

impl Configuration {
    pub fn new(lattice: Lattice, occ: Vec<u8>) -> Result<Self> {
        if occ.len() != lattice.num_sites() {
            return Err(Error::DimensionMismatch(format!(
                "{} occupations for {} sites",
                occ.len(),
                lattice.num_sites()
            )));
        }
        if occ.iter().any(|&v| v > 1) {
            return Err(Error::param("occupation", "values must be 0 or 1"));
        }
        Ok(Configuration { lattice, occ })
    }

    pub fn empty(lattice: Lattice) -> Self {
        Configuration {
            lattice,
            occ: vec![0; lattice.num_sites()],
        }
    }

    pub fn full(lattice: Lattice) -> Self {
        Configuration {
            lattice,
            occ: vec![1; lattice.num_sites()],
        }
    }

    /// Particles at the given sites, everything else empty.
    pub fn with_particles(lattice: Lattice, sites: &[usize]) -> Self {
        let mut c = Self::empty(lattice);
        for &s in sites {
            c.occ[s] = 1;
        }
        c
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    #[inline]
    pub fn get(&self, site: usize) -> u8 {
        self.occ[site]
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occ
    }

    pub fn particles(&self) -> usize {
        self.occ.iter().map(|&v| v as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.particles() as f64 / self.lattice.num_sites() as f64
    }

    /// `σ^{x,y} η`.
    #[inline]
    pub fn exchange(&mut self, x: usize, y: usize) {
        self.occ.swap(x, y);
    }

    pub fn exchanged(&self, x: usize, y: usize) -> Configuration {
        let mut c = self.clone();
        c.exchange(x, y);
        c
    }
}

/// A draw from the Bernoulli product measure `ν_ρ`.
pub fn sample_bernoulli(rho: f64, lattice: Lattice, seed: u64) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("density must lie in [0, 1], got {rho}")));
    }
    let mut rng = chacha(derive_seed(seed, stream::BERNOULLI, 0));
    let occ = (0..lattice.num_sites())
        .map(|_| u8::from(rng.random::<f64>() < rho))
        .collect();
    Ok(Configuration { lattice, occ })
}
