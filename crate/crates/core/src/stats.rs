//! Sample moments and z-scores for Monte Carlo checks.

/// Moments of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased variance.
    pub variance: f64,
    /// Central third and fourth moments (biased).
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Moments {
        let n = xs.len();
        if n == 0 {
            return Moments {
                n,
                mean: f64::NAN,
                variance: f64::NAN,
                m3: f64::NAN,
                m4: f64::NAN,
            };
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        Moments {
            n,
            mean,
            variance: if n > 1 { m2 / (nf - 1.0) } else { 0.0 },
            m3: m3 / nf,
            m4: m4 / nf,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }

    /// Standard error of the sample variance, from the fourth moment.
    pub fn variance_stderr(&self) -> f64 {
        let biased = self.variance * (self.n as f64 - 1.0) / self.n as f64;
        ((self.m4 - biased * biased).max(0.0) / self.n as f64).sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let biased = self.variance * (self.n as f64 - 1.0) / self.n as f64;
        self.m3 / biased.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let biased = self.variance * (self.n as f64 - 1.0) / self.n as f64;
        self.m4 / (biased * biased) - 3.0
    }

    /// z-score of the mean against `expected`.
    pub fn z_mean(&self, expected: f64) -> f64 {
        z_score(self.mean - expected, self.stderr())
    }

    /// z-score of the sample variance against `expected`.
    pub fn z_variance(&self, expected: f64) -> f64 {
        z_score(self.variance - expected, self.variance_stderr())
    }

    /// Skewness z-score under the Gaussian null (`se = √(6/n)`).
    pub fn z_skewness(&self) -> f64 {
        self.skewness() / (6.0 / self.n as f64).sqrt()
    }

    /// Excess-kurtosis z-score under the Gaussian null (`se = √(24/n)`).
    pub fn z_kurtosis(&self) -> f64 {
        self.excess_kurtosis() / (24.0 / self.n as f64).sqrt()
    }
}

/// `diff / se`, with exact agreement mapped to zero.
pub fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Batch means of a correlated series: the series is cut into `batches`
/// contiguous blocks and the block averages returned.
pub fn batch_means(xs: &[f64], batches: usize) -> Vec<f64> {
    let len = xs.len() / batches.max(1);
    if len == 0 {
        return Vec::new();
    }
    xs.chunks_exact(len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_sample() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!(m.skewness().abs() < 1e-15);
    }

    #[test]
    fn z_of_exact_match_is_zero() {
        assert_eq!(z_score(0.0, 0.0), 0.0);
        assert!(z_score(1.0, 0.0).is_infinite());
    }

    #[test]
    fn batches() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(batch_means(&xs, 2), vec![2.0, 7.0]);
    }
}
