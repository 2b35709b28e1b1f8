use crate::error::{Error, Result};

use super::MIN_WINDOW_SAMPLES;

/// Number of autocorrelation lags sampled per signal.
pub const AUTOCORR_SAMPLES: usize = 10;

/// Below this second central moment a signal is treated as constant.
const DEGENERATE_VARIANCE: f64 = 1e-24;

/// Population moments of a sample array.
///
/// `kurtosis` is Pearson's (3 for a normal distribution), not excess.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Moments {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn moment_features(x: &[f64]) -> Result<Moments> {
    if x.len() < 2 {
        return Err(Error::contract(format!("moments need at least 2 samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let (min, max) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    // A constant array can still sum to a mean off by an ulp.
    let mean = (x.iter().sum::<f64>() / n).clamp(min, max);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 < DEGENERATE_VARIANCE {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    Ok(Moments { min, max, mean, variance: m2, skewness, kurtosis })
}

/// Lags at which the autocorrelation sequence is sampled:
/// `round(j · (W − 1) / 10)` for `j = 1..=10`.
pub fn autocorrelation_lags(width: usize) -> [usize; AUTOCORR_SAMPLES] {
    let mut lags = [0; AUTOCORR_SAMPLES];
    for (j, lag) in lags.iter_mut().enumerate() {
        *lag = (((j + 1) * (width - 1)) as f64 / AUTOCORR_SAMPLES as f64).round() as usize;
    }
    lags
}

/// Ten equidistant samples of the normalized autocorrelation sequence
/// `r(τ) = Σ (x_i − x̄)(x_{i+τ} − x̄) / Σ (x_i − x̄)²`.
pub fn autocorrelation_samples(x: &[f64]) -> Result<[f64; AUTOCORR_SAMPLES]> {
    if x.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::contract(format!(
            "autocorrelation needs at least {MIN_WINDOW_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let energy: f64 = centered.iter().map(|d| d * d).sum();
    let mut out = [0.0; AUTOCORR_SAMPLES];
    if energy / (n as f64) < DEGENERATE_VARIANCE {
        return Ok(out);
    }
    for (slot, lag) in out.iter_mut().zip(autocorrelation_lags(n)) {
        let sum: f64 = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum();
        *slot = sum / energy;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the raw central moments, kept separate from the
    /// single-pass accumulation above.
    fn moment_oracle(x: &[f64]) -> (f64, f64, f64, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let m = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
        (mean, m(2), m(3), m(4))
    }

    #[test]
    fn constant_array_is_degenerate() {
        let m = moment_features(&[4.2; 20]).unwrap();
        assert_eq!(m, Moments { min: 4.2, max: 4.2, mean: 4.2, variance: 0.0, skewness: 0.0, kurtosis: 0.0 });
    }

    #[test]
    fn symmetric_data() {
        let m = moment_features(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.variance, 1.25);
        assert_eq!(m.skewness, 0.0);
    }

    #[test]
    fn skewed_data_matches_oracle() {
        let x = [0.0, 0.0, 0.0, 1.0];
        let (mean, m2, m3, m4) = moment_oracle(&x);
        // By hand: mean 1/4, m2 3/16, m3 3/32, m4 21/256.
        assert!((m2 - 3.0 / 16.0).abs() < 1e-15);
        assert!((m3 - 3.0 / 32.0).abs() < 1e-15);
        assert!((m4 - 21.0 / 256.0).abs() < 1e-15);
        let m = moment_features(&x).unwrap();
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.variance - m2).abs() < 1e-12);
        assert!((m.skewness - m3 / m2.powf(1.5)).abs() < 1e-12);
        assert!((m.kurtosis - m4 / (m2 * m2)).abs() < 1e-12);
        assert!((m.skewness - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((m.kurtosis - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn moments_need_two_samples() {
        assert!(matches!(moment_features(&[1.0]), Err(Error::Contract(_))));
        assert!(matches!(moment_features(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn lags_for_125_samples() {
        assert_eq!(autocorrelation_lags(125), [12, 25, 37, 50, 62, 74, 87, 99, 112, 124]);
        assert_eq!(autocorrelation_lags(16), [2, 3, 5, 6, 8, 9, 11, 12, 14, 15]);
    }

    #[test]
    fn constant_autocorrelation_is_zero() {
        assert_eq!(autocorrelation_samples(&[7.0; 32]).unwrap(), [0.0; 10]);
    }

    #[test]
    fn last_lag_is_product_of_end_points() {
        let mut x: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let ac = autocorrelation_samples(&x).unwrap();
        let energy: f64 = x.iter().map(|v| v * v).sum();
        assert!((ac[9] - x[0] * x[39] / energy).abs() < 1e-12);
    }

    #[test]
    fn cosine_autocorrelation_at_one_period_multiple() {
        let x: Vec<f64> = (0..125)
            .map(|i| (2.0 * std::f64::consts::PI * 5.0 * i as f64 / 25.0).cos())
            .collect();
        // Direct sum, independent of the implementation's centring.
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let lag = 25;
        let oracle: f64 = (0..125 - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / energy;
        // The biased estimator attenuates by (W − τ)/W = 100/125.
        assert!((oracle - 0.8).abs() < 1e-9);
        let ac = autocorrelation_samples(&x).unwrap();
        assert!((ac[1] - oracle).abs() < 1e-9, "{} vs {oracle}", ac[1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn autocorrelation_is_bounded(x in proptest::collection::vec(-1e3f64..1e3, 16..300)) {
                for r in autocorrelation_samples(&x).unwrap() {
                    prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&r));
                }
            }

            #[test]
            fn moments_match_oracle(x in proptest::collection::vec(-1e2f64..1e2, 2..100)) {
                let m = moment_features(&x).unwrap();
                let (mean, m2, m3, m4) = moment_oracle(&x);
                prop_assert!((m.mean - mean).abs() < 1e-9);
                prop_assert!((m.variance - m2).abs() < 1e-9 * (1.0 + m2));
                if m2 > 1e-6 {
                    prop_assert!((m.skewness - m3 / m2.powf(1.5)).abs() < 1e-7);
                    prop_assert!((m.kurtosis - m4 / (m2 * m2)).abs() < 1e-7);
                }
            }
        }
    }
}
