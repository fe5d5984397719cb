//! Sample summaries shared by the Monte-Carlo estimators.

use serde::Serialize;

/// Mean, sample standard deviation and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std: f64,
    pub se: f64,
    pub trials: usize,
}

impl Estimate {
    /// Summarizes `samples` in order, so equal inputs give equal bits.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                se: f64::NAN,
                trials: 0,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            se: std / (n as f64).sqrt(),
            trials: n,
        }
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_small_sample() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((e.se - e.std / 2.0).abs() < 1e-15);
        let one = Estimate::from_samples(&[7.0]);
        assert_eq!((one.mean, one.std, one.se), (7.0, 0.0, 0.0));
    }

    #[test]
    fn ks_of_uniform_grid() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.5).collect();
        assert!(ks_statistic(&shifted, |x| x.clamp(0.0, 1.0)) > 0.49);
    }
}
