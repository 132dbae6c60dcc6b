use crate::dynamics::{Configuration, ExclusionProcess, Observer};
use crate::{Error, LatticeFunction, Result};

/// `Y(G) = N^{-d/2} Σ_x G(x/N)(η(x) − ρ)` with `g` the restriction of `G`.
pub fn field_value(cfg: &Configuration, g: &LatticeFunction, rho: f64) -> Result<f64> {
    if cfg.lattice() != g.lattice() {
        return Err(Error::DimensionMismatch(
            "configuration and test function lattices differ".into(),
        ));
    }
    Ok(raw_field(cfg.occupancy(), g.values(), rho) * field_scale(g))
}

pub(crate) fn field_scale(g: &LatticeFunction) -> f64 {
    (g.lattice().num_sites() as f64).sqrt().recip()
}

fn raw_field(occ: &[u8], g: &[f64], rho: f64) -> f64 {
    occ.iter().zip(g).map(|(&e, &gx)| gx * (f64::from(e) - rho)).sum()
}

/// Fluctuation-field values `Y_{t_i}(G)` of one replica.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSeries {
    pub replica: u64,
    pub rho: f64,
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `values[g][i] = Y_{t_i}(G_g)`.
    pub values: Vec<Vec<f64>>,
}

impl FieldSeries {
    pub fn new(replica: u64, rho: f64, times: Vec<f64>, labels: Vec<String>) -> Self {
        let values = vec![Vec::with_capacity(times.len()); labels.len()];
        FieldSeries {
            replica,
            rho,
            times,
            labels,
            values,
        }
    }

    pub fn series(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.values[i].as_slice())
    }
}

/// Records `Y_t(G)` for several test functions at the sample times.
pub struct FieldObserver {
    funcs: Vec<LatticeFunction>,
    series: FieldSeries,
}

impl FieldObserver {
    pub fn new(replica: u64, rho: f64, times: &[f64], labelled: Vec<(String, LatticeFunction)>) -> Self {
        let (labels, funcs) = labelled.into_iter().unzip();
        FieldObserver {
            funcs,
            series: FieldSeries::new(replica, rho, times.to_vec(), labels),
        }
    }

    pub fn into_series(self) -> FieldSeries {
        self.series
    }
}

impl Observer for FieldObserver {
    fn on_sample(&mut self, p: &ExclusionProcess, _time: f64) {
        let rho = self.series.rho;
        for (g, out) in self.funcs.iter().zip(self.series.values.iter_mut()) {
            out.push(raw_field(p.configuration().occupancy(), g.values(), rho) * field_scale(g));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sample_bernoulli;
    use crate::stats::Moments;
    use crate::Lattice;

    #[test]
    fn direct_sums() {
        let l = Lattice::new(1, 16).unwrap();
        let one = LatticeFunction::constant(l, 1.0);
        assert_eq!(field_value(&Configuration::empty(l), &one, 0.0).unwrap(), 0.0);
        let cfg = Configuration::with_particles(l, &[1, 4, 9]);
        let y = field_value(&cfg, &one, 0.25).unwrap();
        assert!((y - (3.0 - 4.0) / 4.0).abs() < 1e-15);
        let other = LatticeFunction::constant(Lattice::new(1, 8).unwrap(), 1.0);
        assert!(field_value(&cfg, &other, 0.5).is_err());
    }

    #[test]
    fn bernoulli_variance_matches_chi_norm() {
        let l = Lattice::new(1, 256).unwrap();
        let g = LatticeFunction::from_fn(l, |x| {
            std::f64::consts::SQRT_2 * (2.0 * std::f64::consts::PI * x[0]).cos()
        });
        let ys: Vec<f64> = (0..4000)
            .map(|s| field_value(&sample_bernoulli(0.5, l, s).unwrap(), &g, 0.5).unwrap())
            .collect();
        let m = Moments::of(&ys);
        let expected = 0.25 * g.norm_sq();
        assert!(m.z_variance(expected).abs() < 3.0, "var {}", m.variance);
    }
}
