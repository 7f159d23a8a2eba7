//! Shared statistics helpers: Kolmogorov–Smirnov distances, target
//! distribution parameterization, and the fixed 12-significant-digit float
//! format used by every CSV/JSON writer.

use rand::SeedableRng;
use rand_distr::Distribution;
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};

/// Named fit targets: sampleable and with an exact CDF for quality checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetDistribution {
    /// Parameterized by the mean and sd of the distribution itself.
    LogNormal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
}

impl TargetDistribution {
    pub fn sample_n(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        match *self {
            TargetDistribution::LogNormal { mean, sd } => {
                let (mu, sigma) = lognormal_params_from_mean_sd(mean, sd)?;
                let dist = rand_distr::LogNormal::new(mu, sigma)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
            }
            TargetDistribution::Exponential { rate } => {
                if !(rate > 0.0) {
                    return Err(Error::InvalidInput("rate must be positive".into()));
                }
                let dist = rand_distr::Exp::new(rate)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?;
                Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            TargetDistribution::LogNormal { mean, sd } => {
                let (mu, sigma) =
                    lognormal_params_from_mean_sd(mean, sd).expect("validated on construction");
                statrs::distribution::Normal::new(mu, sigma)
                    .expect("sigma > 0")
                    .cdf(t.ln())
            }
            TargetDistribution::Exponential { rate } => 1.0 - (-rate * t).exp(),
        }
    }
}

/// One-sample KS statistic of `samples` against `cdf`. `samples` need not be
/// sorted; ties are handled by the usual sup over both one-sided gaps.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}

/// Two-sample KS statistic (sup distance between empirical CDFs).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        if xs[i] < ys[j] {
            i += 1;
        } else if ys[j] < xs[i] {
            j += 1;
        } else {
            // advance both sides past the tied value
            let v = xs[i];
            while i < xs.len() && xs[i] == v {
                i += 1;
            }
            while j < ys.len() && ys[j] == v {
                j += 1;
            }
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value `c(alpha) * sqrt((n+m)/(n*m))` for the two-sample KS test.
pub fn ks_two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2)/2)
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * (((n + m) as f64) / ((n * m) as f64)).sqrt()
}

/// Underlying normal parameters (mu, sigma) of a log-normal specified by the
/// mean and standard deviation of the distribution itself.
pub fn lognormal_params_from_mean_sd(mean: f64, sd: f64) -> Result<(f64, f64)> {
    if !(mean > 0.0 && sd > 0.0) {
        return Err(Error::InvalidInput(format!(
            "log-normal mean and sd must be positive, got mean={mean}, sd={sd}"
        )));
    }
    let sigma2 = (1.0 + (sd / mean).powi(2)).ln();
    let mu = mean.ln() - 0.5 * sigma2;
    Ok((mu, sigma2.sqrt()))
}

/// Render a float with exactly 12 significant digits (scientific form). All
/// persisted numeric output goes through this so identical runs are
/// byte-identical.
pub fn format_sig12(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // normalize -0.0
    format!("{x:.11e}")
}

/// Counter-based derivation of per-worker seeds from a master seed: SplitMix64
/// over `master XOR (index * golden gamma)`. Deterministic and independent of
/// scheduling order, so parallel ensembles and restarts reproduce exactly.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        ^ index
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (denominator n-1).
pub fn std_dev(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_exact_uniform_grid_is_half_step() {
        // Points at (i+0.5)/n have KS distance 0.5/n against U(0,1).
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn two_sample_ks_of_identical_samples_is_zero() {
        let xs = vec![0.3, 1.2, 2.0, 5.5];
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
    }

    #[test]
    fn two_sample_ks_of_disjoint_samples_is_one() {
        let xs = vec![0.0, 1.0];
        let ys = vec![10.0, 11.0];
        assert_eq!(ks_two_sample(&xs, &ys), 1.0);
    }

    #[test]
    fn lognormal_parameterization_matches_moments() {
        let (mu, sigma) = lognormal_params_from_mean_sd(12.7, 4.31).unwrap();
        let mean = (mu + 0.5 * sigma * sigma).exp();
        let var = ((sigma * sigma).exp() - 1.0) * (2.0 * mu + sigma * sigma).exp();
        assert!((mean - 12.7).abs() < 1e-10);
        assert!((var.sqrt() - 4.31).abs() < 1e-10);
        assert!(lognormal_params_from_mean_sd(-1.0, 1.0).is_err());
    }

    #[test]
    fn sig12_format_is_stable() {
        assert_eq!(format_sig12(0.0), "0.00000000000e0");
        assert_eq!(format_sig12(-0.0), "0.00000000000e0");
        assert_eq!(format_sig12(12.7), "1.27000000000e1");
        assert_eq!(format_sig12(-3.5e-4), "-3.50000000000e-4");
    }
}
