use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

use super::MIN_WINDOW_SAMPLES;

pub const PEAK_COUNT: usize = 5;

/// Bins at or below this fraction of `Σ|x|` are numerical noise.
const NOISE_FLOOR: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Magnitudes `|X[b]|` for bins `1..=W/2`; index 0 of the result is bin 1.
fn half_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buffer: Vec<Complex<f64>> = x.iter().map(|&re| Complex { re, im: 0.0 }).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buffer);
    buffer[1..=n / 2].iter().map(|c| c.norm()).collect()
}

/// The five largest local maxima of the magnitude spectrum as
/// `(magnitude, frequency_hz)`, largest first, padded with `(0, 0)`.
///
/// DC is excluded. Bin `b` is a peak when `|X[b]| > |X[b+1]|` and
/// `|X[b]| ≥ |X[b−1]|`; edge bins only compare their existing neighbour.
pub fn dft_peaks(x: &[f64], fs: f64) -> Result<[(f64, f64); PEAK_COUNT]> {
    if x.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::contract(format!(
            "spectral peaks need at least {MIN_WINDOW_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::contract("sampling frequency must be positive"));
    }
    let n = x.len();
    let floor = NOISE_FLOOR * x.iter().map(|v| v.abs()).sum::<f64>();
    let mags = half_spectrum(x);
    let mut peaks: Vec<(f64, usize)> = Vec::new();
    for i in 0..mags.len() {
        let m = mags[i];
        if m <= floor {
            continue;
        }
        let above_next = i + 1 >= mags.len() || m > mags[i + 1];
        let at_least_prev = i == 0 || m >= mags[i - 1];
        if above_next && at_least_prev {
            peaks.push((m, i + 1));
        }
    }
    // Descending magnitude, lower bin first on ties.
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out = [(0.0, 0.0); PEAK_COUNT];
    for (slot, &(magnitude, bin)) in out.iter_mut().zip(&peaks) {
        *slot = (magnitude, bin as f64 * fs / n as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Textbook O(W²) DFT magnitude for bins 1..=W/2.
    fn direct_dft(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (1..=n / 2)
            .map(|b| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in x.iter().enumerate() {
                    let angle = -2.0 * PI * (b * i) as f64 / n as f64;
                    re += v * angle.cos();
                    im += v * angle.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        assert_eq!(dft_peaks(&[3.0; 125], 25.0).unwrap(), [(0.0, 0.0); 5]);
    }

    #[test]
    fn five_hz_tone_peaks_at_bin_25() {
        let x = tone(5.0, 25.0, 125);
        let oracle = direct_dft(&x);
        let best = (0..oracle.len()).max_by(|&a, &b| oracle[a].total_cmp(&oracle[b])).unwrap();
        assert_eq!(best + 1, 25);
        let peaks = dft_peaks(&x, 25.0).unwrap();
        assert_eq!(peaks[0].1, 5.0);
        assert!((peaks[0].0 - oracle[best]).abs() < 1e-9);
    }

    #[test]
    fn two_tones_are_the_top_two_peaks() {
        let x: Vec<f64> = tone(3.0, 25.0, 125).iter().zip(tone(8.0, 25.0, 125)).map(|(a, b)| a + b).collect();
        let oracle = direct_dft(&x);
        assert!((oracle[14] - oracle[39]).abs() / oracle[14] < 0.01);
        let peaks = dft_peaks(&x, 25.0).unwrap();
        let mut top: Vec<f64> = peaks[..2].iter().map(|p| p.1).collect();
        top.sort_by(f64::total_cmp);
        assert!((top[0] - 3.0).abs() < 0.03 && (top[1] - 8.0).abs() < 0.08, "{top:?}");
        assert!((peaks[0].0 - peaks[1].0).abs() / peaks[0].0 < 0.01);
    }

    #[test]
    fn fft_matches_direct_dft() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 23) as f64 - 11.0 + (i as f64 * 0.3).sin()).collect();
        let fast = half_spectrum(&x);
        for (a, b) in fast.iter().zip(direct_dft(&x)) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b));
        }
    }

    #[test]
    fn peaks_use_local_maximum_rule() {
        // Spectrum shape is checked against the oracle, then peaks derived by hand.
        let x: Vec<f64> = (0..32).map(|i| if i % 8 < 4 { 1.0 } else { -1.0 }).collect();
        let oracle = direct_dft(&x);
        let expected: Vec<usize> = (0..oracle.len())
            .filter(|&i| oracle[i] > 1e-9)
            .filter(|&i| (i + 1 >= oracle.len() || oracle[i] > oracle[i + 1]) && (i == 0 || oracle[i] >= oracle[i - 1]))
            .map(|i| i + 1)
            .collect();
        let peaks = dft_peaks(&x, 32.0).unwrap();
        let mut got: Vec<usize> = peaks.iter().filter(|p| p.0 > 0.0).map(|p| p.1 as usize).collect();
        got.sort();
        let mut want = expected.clone();
        want.sort_by(|a, b| oracle[b - 1].total_cmp(&oracle[a - 1]));
        want.truncate(5);
        want.sort();
        assert_eq!(got, want);
        // Square wave with period 8 samples: odd harmonics at 4, 12 Hz.
        assert_eq!(peaks[0].1, 4.0);
    }

    #[test]
    fn short_input_is_rejected() {
        assert!(dft_peaks(&[1.0; 8], 25.0).is_err());
        assert!(dft_peaks(&[1.0; 16], 0.0).is_err());
    }
}
