//! Window segmentation, per-signal statistics and chi-squared feature ranking.
//!
//! Every signal of a window contributes 26 values, in this order:
//!
//! | slot   | feature                                         |
//! |--------|-------------------------------------------------|
//! | 0..6   | min, max, mean, variance, skewness, kurtosis    |
//! | 6..16  | ten autocorrelation samples                     |
//! | 16..21 | magnitudes of the five largest spectral peaks   |
//! | 21..26 | frequencies of those peaks (Hz)                 |
//!
//! Signals are laid out per device, then accelerometer / gyroscope /
//! magnetometer, then x / y / z, giving 234 values per device.

mod moments;
mod select;
mod spectrum;
pub mod table;
mod window;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{Channel, SignalId};

pub use moments::{autocorrelation_samples, moment_features, Moments, AUTOCORR_SAMPLES};
pub use select::{chi2_scores, chi2_scores_indexed, select_top_k, FeatureSelection};
pub use spectrum::{dft_peaks, PEAK_COUNT};
pub use window::{make_windows, WindowParams, MAX_MISSING_FRACTION};

/// Features computed for each signal.
pub const FEATURES_PER_SIGNAL: usize = 26;
/// Features computed for each device (nine signals).
pub const FEATURES_PER_DEVICE: usize = FEATURES_PER_SIGNAL * Channel::COUNT;
/// Smallest window length, in samples, the spectral features accept.
pub const MIN_WINDOW_SAMPLES: usize = 16;

const FEATURE_SUFFIXES: [&str; FEATURES_PER_SIGNAL] = [
    "min", "max", "mean", "var", "skew", "kurt", "ac1", "ac2", "ac3", "ac4", "ac5", "ac6", "ac7",
    "ac8", "ac9", "ac10", "peakmag1", "peakmag2", "peakmag3", "peakmag4", "peakmag5", "peakfreq1",
    "peakfreq2", "peakfreq3", "peakfreq4", "peakfreq5",
];

/// Fixed-duration slice of every signal of one player.
///
/// `signals` lists the canonical signals `dev0.acc.x ..= dev{n-1}.mag.z` in
/// order, and `samples[i]` holds the samples of `signals[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalWindow {
    pub player_id: Arc<str>,
    pub period_id: u32,
    pub start_t: f64,
    pub duration_s: f64,
    pub signals: Vec<SignalId>,
    pub samples: Vec<Vec<f64>>,
}

impl SignalWindow {
    /// Builds a window from per-signal sample columns in canonical order.
    pub fn from_columns(
        player_id: impl Into<Arc<str>>,
        period_id: u32,
        start_t: f64,
        duration_s: f64,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let signals = (0..samples.len())
            .map(|i| SignalId {
                device: (i / Channel::COUNT) as u16,
                channel: Channel::from_index(i % Channel::COUNT).unwrap(),
            })
            .collect();
        let window = SignalWindow {
            player_id: player_id.into(),
            period_id,
            start_t,
            duration_s,
            signals,
            samples,
        };
        window.validate()?;
        Ok(window)
    }

    pub fn device_count(&self) -> usize {
        self.signals.len() / Channel::COUNT
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.signals.is_empty() || self.signals.len() % Channel::COUNT != 0 {
            return Err(Error::contract(format!(
                "window must carry whole devices, got {} signals",
                self.signals.len()
            )));
        }
        if self.samples.len() != self.signals.len() {
            return Err(Error::contract("one sample column per signal required"));
        }
        for (i, signal) in self.signals.iter().enumerate() {
            if signal.canonical_index() != i {
                return Err(Error::contract(format!("signal {signal} out of canonical order")));
            }
        }
        let width = self.len();
        if width < MIN_WINDOW_SAMPLES {
            return Err(Error::contract(format!(
                "window has {width} samples, need at least {MIN_WINDOW_SAMPLES}"
            )));
        }
        if self.samples.iter().any(|s| s.len() != width) {
            return Err(Error::contract("all signals of a window must have the same length"));
        }
        Ok(())
    }

    pub fn window_ref(&self) -> WindowRef {
        WindowRef {
            player_id: self.player_id.to_string(),
            period_id: self.period_id,
            start_t: self.start_t,
            duration_s: self.duration_s,
        }
    }
}

/// Where a feature vector came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowRef {
    pub player_id: String,
    pub period_id: u32,
    pub start_t: f64,
    pub duration_s: f64,
}

impl WindowRef {
    pub fn end_t(&self) -> f64 {
        self.start_t + self.duration_s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    /// Training subject or match player the window belongs to.
    pub subject: String,
    pub label: Option<String>,
    pub window: WindowRef,
}

impl FeatureVector {
    pub fn device_count(&self) -> usize {
        self.values.len() / FEATURES_PER_DEVICE
    }
}

/// Canonical feature names, e.g. `dev0.acc.x.var`.
pub fn feature_names(device_count: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(device_count * FEATURES_PER_DEVICE);
    for device in 0..device_count {
        for channel in Channel::all() {
            for suffix in FEATURE_SUFFIXES {
                names.push(format!("dev{device}.{channel}.{suffix}"));
            }
        }
    }
    names
}

/// The 26 features of a single signal.
pub fn signal_features(x: &[f64], fs: f64) -> Result<[f64; FEATURES_PER_SIGNAL]> {
    let m = moment_features(x)?;
    let ac = autocorrelation_samples(x)?;
    let peaks = dft_peaks(x, fs)?;
    let mut out = [0.0; FEATURES_PER_SIGNAL];
    out[..6].copy_from_slice(&[m.min, m.max, m.mean, m.variance, m.skewness, m.kurtosis]);
    out[6..16].copy_from_slice(&ac);
    for (i, (magnitude, frequency)) in peaks.into_iter().enumerate() {
        out[16 + i] = magnitude;
        out[21 + i] = frequency;
    }
    Ok(out)
}

/// Computes the `234 · n` feature vector of a window sampled at `fs` Hz.
pub fn extract_features(window: &SignalWindow, fs: f64) -> Result<FeatureVector> {
    window.validate()?;
    let mut values = Vec::with_capacity(window.signals.len() * FEATURES_PER_SIGNAL);
    for column in &window.samples {
        values.extend_from_slice(&signal_features(column, fs)?);
    }
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector {
        values,
        subject: window.player_id.to_string(),
        label: None,
        window: window.window_ref(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_window(devices: usize, c: f64, width: usize) -> SignalWindow {
        SignalWindow::from_columns("p", 1, 0.0, 5.0, vec![vec![c; width]; devices * 9]).unwrap()
    }

    #[test]
    fn one_device_has_234_features() {
        let fv = extract_features(&constant_window(1, 1.0, 125), 25.0).unwrap();
        assert_eq!(fv.values.len(), 234);
        assert_eq!(feature_names(1).len(), 234);
    }

    #[test]
    fn five_devices_have_1170_features() {
        let fv = extract_features(&constant_window(5, 1.0, 125), 25.0).unwrap();
        assert_eq!(fv.values.len(), 1170);
    }

    #[test]
    fn constant_window_composes_degenerate_conventions() {
        let c = 3.5;
        let fv = extract_features(&constant_window(2, c, 40), 25.0).unwrap();
        let mut expected = vec![c, c, c, 0.0, 0.0, 0.0];
        expected.extend([0.0; 20]);
        for chunk in fv.values.chunks(FEATURES_PER_SIGNAL) {
            assert_eq!(chunk, expected.as_slice());
        }
    }

    #[test]
    fn names_follow_canonical_order() {
        let names = feature_names(2);
        assert_eq!(names[0], "dev0.acc.x.min");
        assert_eq!(names[3], "dev0.acc.x.var");
        assert_eq!(names[25], "dev0.acc.x.peakfreq5");
        assert_eq!(names[26], "dev0.acc.y.min");
        assert_eq!(names[234], "dev1.acc.x.min");
        assert_eq!(names[233], "dev0.mag.z.peakfreq5");
    }

    #[test]
    fn short_window_is_rejected() {
        let w = SignalWindow {
            player_id: "p".into(),
            period_id: 1,
            start_t: 0.0,
            duration_s: 1.0,
            signals: constant_window(1, 0.0, 16).signals,
            samples: vec![vec![0.0; 10]; 9],
        };
        assert!(matches!(extract_features(&w, 25.0), Err(Error::Contract(_))));
    }

    fn scale_case() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (16usize..200).prop_flat_map(|w| (proptest::collection::vec(-50.0f64..50.0, w), 0.01f64..100.0))
    }

    proptest! {
        #[test]
        fn scaling_a_channel_scales_its_features((x, alpha) in scale_case()) {
            let fs = 25.0;
            let base = signal_features(&x, fs).unwrap();
            let scaled_x: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let scaled = signal_features(&scaled_x, fs).unwrap();
            let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()));
            for i in 0..3 {
                prop_assert!(close(scaled[i], alpha * base[i], 1e-9));
            }
            prop_assert!(close(scaled[3], alpha * alpha * base[3], 1e-9));
            for i in 4..16 {
                prop_assert!(close(scaled[i], base[i], 1e-9), "slot {} {} vs {}", i, scaled[i], base[i]);
            }
            for i in 16..21 {
                prop_assert!(close(scaled[i], alpha * base[i], 1e-9));
            }
            for i in 21..26 {
                prop_assert_eq!(scaled[i], base[i]);
            }
        }
    }
}
