/// Monte Carlo estimate of a mean first-passage or association time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FptStats {
    pub mean: f64,
    /// Sample standard deviation over √n; zero for a single sample.
    pub stderr: f64,
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl FptStats {
    /// Summarizes samples in the given order, so equal inputs give
    /// bit-identical statistics.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        let (min, max) =
            samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        // Rounding in the mean can push it a hair outside [min, max] when all
        // samples are equal.
        let mean = mean.clamp(min, max);
        Some(Self { mean, stderr, n, min, max })
    }

    /// |mean − reference| in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.mean - reference).abs() / self.stderr
        } else if self.mean == reference {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_sample() {
        let s = FptStats::from_samples(&[0.25]).unwrap();
        assert_eq!((s.mean, s.stderr, s.min, s.max, s.n), (0.25, 0.0, 0.25, 0.25, 1));
        assert!(FptStats::from_samples(&[]).is_none());
    }

    #[test]
    fn known_values() {
        let s = FptStats::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s.stderr - sd / 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn mean_within_range(xs in prop::collection::vec(0.0f64..1e3, 1..200)) {
            let s = FptStats::from_samples(&xs).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
            prop_assert!(s.stderr >= 0.0);
        }
    }
}
