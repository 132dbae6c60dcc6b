use rand::Rng;
use rand_distr::Exp1;

use crate::operators::LatticeOperator;
use crate::rng::{chacha, derive_seed, stream};
use crate::{Error, Lattice, Result};

/// Path of the single-particle walk with jump rate `N²ξ` across each bond.
#[derive(Clone, Debug)]
pub struct WalkPath {
    lattice: Lattice,
    t_end: f64,
    /// `times[0] = 0`; `times[i]` is the time of jump `i`.
    times: Vec<f64>,
    sites: Vec<usize>,
    /// Axis and direction (`±1`) of each jump.
    moves: Vec<(usize, i8)>,
}

impl WalkPath {
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn final_time(&self) -> f64 {
        self.t_end
    }

    pub fn jumps(&self) -> usize {
        self.moves.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Site occupied at time `t` (right-continuous).
    pub fn site_at(&self, t: f64) -> usize {
        self.sites[self.index_at(t)]
    }

    /// Unwrapped lattice displacement from the start at time `t`.
    pub fn displacement_at(&self, t: f64) -> Vec<i64> {
        let mut disp = vec![0i64; self.lattice.dim()];
        for &(axis, dir) in &self.moves[..self.index_at(t)] {
            disp[axis] += i64::from(dir);
        }
        disp
    }

    /// Time spent at each site during `[0, T]`.
    pub fn occupation_times(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.lattice.num_sites()];
        for (i, &s) in self.sites.iter().enumerate() {
            let end = self.times.get(i + 1).copied().unwrap_or(self.t_end);
            occ[s] += end - self.times[i];
        }
        occ
    }

    /// Number of jumps across the bond `(site, site + e_axis)` in either direction.
    pub fn crossings(&self, site: usize, axis: usize) -> usize {
        self.sites
            .windows(2)
            .zip(&self.moves)
            .filter(|(w, &(a, dir))| a == axis && ((dir > 0 && w[0] == site) || (dir < 0 && w[1] == site)))
            .count()
    }
}

/// Continuous-time nearest-neighbour walk generated by the lattice operator.
pub fn random_walk_simulate(op: &LatticeOperator, x0: usize, t_end: f64, seed: u64) -> Result<WalkPath> {
    let lattice = op.lattice();
    if x0 >= lattice.num_sites() {
        return Err(Error::param(
            "x0",
            format!("site {x0} outside a lattice of {} sites", lattice.num_sites()),
        ));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::param(
            "T",
            format!("final time must be finite and nonnegative, got {t_end}"),
        ));
    }
    let d = lattice.dim();
    let mut rng = chacha(derive_seed(seed, stream::WALK, 0));
    let mut path = WalkPath {
        lattice,
        t_end,
        times: vec![0.0],
        sites: vec![x0],
        moves: Vec::new(),
    };
    let mut x = x0;
    let mut t = 0.0;
    let mut rates = vec![0.0; 2 * d];
    loop {
        for j in 0..d {
            rates[2 * j] = op.conductance(x * d + j);
            rates[2 * j + 1] = op.conductance(lattice.shift(x, j, -1) * d + j);
        }
        let total: f64 = rates.iter().sum();
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t > t_end {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut k = 0;
        while k + 1 < rates.len() && u >= rates[k] {
            u -= rates[k];
            k += 1;
        }
        let (axis, dir) = (k / 2, if k % 2 == 0 { 1i8 } else { -1i8 });
        x = lattice.shift(x, axis, isize::from(dir));
        path.times.push(t);
        path.sites.push(x);
        path.moves.push((axis, dir));
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_field, EnvironmentSpec};
    use crate::operators::assemble;
    use crate::wfunc::{AxisProfile, WFunction};

    fn flat(d: usize, n: usize) -> LatticeOperator {
        let field = sample_field(&EnvironmentSpec::constant(1.0), d, n).unwrap();
        assemble(&WFunction::identity(d), &field).unwrap()
    }

    #[test]
    fn occupation_times_add_up() {
        let p = random_walk_simulate(&flat(2, 6), 3, 0.5, 1).unwrap();
        let total: f64 = p.occupation_times().iter().sum();
        assert!((total - 0.5).abs() < 1e-12);
        assert_eq!(p.site_at(0.0), 3);
        assert_eq!(p.site_at(0.5), *p.sites().last().unwrap());
    }

    #[test]
    fn displacement_tracks_site() {
        let p = random_walk_simulate(&flat(1, 10), 0, 0.3, 2).unwrap();
        let disp = p.displacement_at(0.3)[0];
        assert_eq!(disp.rem_euclid(10) as usize, p.site_at(0.3));
    }

    #[test]
    fn mean_squared_displacement_rate() {
        // Scaled displacement X/N has variance 2t in the flat case.
        let (n, t, walks) = (64usize, 0.05, 10_000u64);
        let op = flat(1, n);
        let msd: f64 = (0..walks)
            .map(|s| {
                let p = random_walk_simulate(&op, 0, t, s).unwrap();
                let x = p.displacement_at(t)[0] as f64 / n as f64;
                x * x
            })
            .sum::<f64>()
            / walks as f64;
        assert!((msd / t / 2.0 - 1.0).abs() < 0.05, "MSD/t = {}", msd / t);
    }

    #[test]
    fn membrane_suppresses_crossings() {
        let n = 16;
        let wf = WFunction::new(vec![AxisProfile::new(1.0, vec![(0.5, 0.5)]).unwrap()]).unwrap();
        let field = sample_field(&EnvironmentSpec::constant(1.0), 1, n).unwrap();
        let op = assemble(&wf, &field).unwrap();
        // The jump at 1/2 sits in cell 7, the bond (7, 8).
        let ratio = op.conductance(7) / op.conductance(0);
        assert!((ratio - (1.0 / 16.0) / (1.0 / 16.0 + 0.5)).abs() < 1e-12);
        let p = random_walk_simulate(&op, 0, 400.0, 9).unwrap();
        let slow = p.crossings(7, 0) as f64;
        let fast: f64 = (0..n)
            .filter(|&s| s != 7)
            .map(|s| p.crossings(s, 0) as f64)
            .sum::<f64>()
            / 15.0;
        let expected = ratio * fast;
        assert!(
            (slow - expected).abs() < 4.0 * expected.sqrt() + 0.05 * expected,
            "slow {slow}, expected {expected}"
        );
    }
}
