use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sensor::{Channel, SensorReading, SignalId};

use super::{SignalWindow, MIN_WINDOW_SAMPLES};

/// A window with more than this fraction of missing samples on any channel
/// is dropped; smaller gaps are filled by holding the previous value.
pub const MAX_MISSING_FRACTION: f64 = 0.05;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WindowParams {
    pub duration_s: f64,
    pub overlap_fraction: f64,
    pub sample_rate_hz: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams { duration_s: 5.0, overlap_fraction: 0.0, sample_rate_hz: 25.0 }
    }
}

impl WindowParams {
    pub fn samples_per_window(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn step_s(&self) -> f64 {
        self.duration_s * (1.0 - self.overlap_fraction)
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::argument("window duration must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::argument("overlap fraction must be in [0, 1)"));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::argument("sample rate must be positive"));
        }
        if self.samples_per_window() < MIN_WINDOW_SAMPLES {
            return Err(Error::argument(format!(
                "a {} s window at {} Hz has fewer than {MIN_WINDOW_SAMPLES} samples",
                self.duration_s, self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

type Series = Vec<(f64, f64)>;

/// Cuts synchronized readings into fixed-duration windows.
///
/// Windows are formed per `(player, period)`, starting at the first sample
/// and advancing by `duration × (1 − overlap)`. Only windows that fit
/// entirely before the last sample are emitted. Players whose devices do not
/// all report the nine canonical channels produce no windows.
pub fn make_windows(readings: &[SensorReading], params: WindowParams) -> Result<Vec<SignalWindow>> {
    params.validate()?;
    let mut groups: BTreeMap<(Arc<str>, u32), BTreeMap<SignalId, Series>> = BTreeMap::new();
    for r in readings {
        groups
            .entry((r.player_id.clone(), r.period_id))
            .or_default()
            .entry(r.signal)
            .or_default()
            .push((r.t, r.value));
    }

    let width = params.samples_per_window();
    let step = params.step_s();
    let dt = 1.0 / params.sample_rate_hz;
    let mut out = Vec::new();
    for ((player, period), mut series) in groups {
        let signal_count = series.len();
        let complete = signal_count % Channel::COUNT == 0
            && series.keys().enumerate().all(|(i, s)| s.canonical_index() == i);
        if !complete {
            continue;
        }
        for s in series.values_mut() {
            s.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let first = series.values().map(|s| s[0].0).fold(f64::INFINITY, f64::min);
        let last = series.values().map(|s| s[s.len() - 1].0).fold(f64::INFINITY, f64::min);
        let signals: Vec<SignalId> = series.keys().copied().collect();
        let columns: Vec<&Series> = series.values().collect();

        let mut k = 0usize;
        loop {
            let start = first + k as f64 * step;
            k += 1;
            if start + params.duration_s > last + dt + 1e-6 * dt {
                break;
            }
            let samples: Option<Vec<Vec<f64>>> =
                columns.iter().map(|s| fill_slots(s, start, first, width, params.sample_rate_hz)).collect();
            if let Some(samples) = samples {
                out.push(SignalWindow {
                    player_id: player.clone(),
                    period_id: period,
                    start_t: start,
                    duration_s: params.duration_s,
                    signals: signals.clone(),
                    samples,
                });
            }
        }
    }
    Ok(out)
}

/// Places samples on the `width`-slot grid whose first slot is the first
/// sample instant (on the grid of `first`) at or after `start`; returns
/// `None` when too many slots are empty.
fn fill_slots(series: &Series, start: f64, first: f64, width: usize, fs: f64) -> Option<Vec<f64>> {
    let phase = (start - first) * fs;
    let frac = phase - phase.floor();
    let offset = if frac > 1e-6 && frac < 1.0 - 1e-6 { 1.0 - frac } else { 0.0 };
    let lo = series.partition_point(|&(t, _)| t < start + (offset - 0.5) / fs);
    let hi = series.partition_point(|&(t, _)| t < start + (width as f64 + offset - 0.5) / fs);
    let mut slots: Vec<Option<f64>> = vec![None; width];
    for &(t, v) in &series[lo..hi] {
        let slot = ((t - start) * fs - offset).round();
        if slot >= 0.0 && (slot as usize) < width {
            slots[slot as usize] = Some(v);
        }
    }
    let missing = slots.iter().filter(|s| s.is_none()).count();
    if missing as f64 > MAX_MISSING_FRACTION * width as f64 {
        return None;
    }
    let mut held = if lo > 0 { Some(series[lo - 1].1) } else { slots.iter().flatten().next().copied() };
    Some(
        slots
            .into_iter()
            .map(|slot| {
                if slot.is_some() {
                    held = slot;
                }
                held.expect("window has at least one sample")
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn readings(seconds: f64, fs: f64, devices: u16, skip: impl Fn(usize) -> bool) -> Vec<SensorReading> {
        let player: Arc<str> = Arc::from("p1");
        let n = (seconds * fs).round() as usize;
        let mut out = Vec::new();
        for i in (0..n).filter(|&i| !skip(i)) {
            for device in 0..devices {
                for channel in Channel::all() {
                    out.push(SensorReading {
                        player_id: player.clone(),
                        period_id: 1,
                        t: i as f64 / fs,
                        signal: SignalId { device, channel },
                        value: i as f64,
                    });
                }
            }
        }
        out
    }

    fn params(duration_s: f64, overlap_fraction: f64) -> WindowParams {
        WindowParams { duration_s, overlap_fraction, sample_rate_hz: 25.0 }
    }

    #[test]
    fn five_minutes_make_sixty_windows() {
        let windows = make_windows(&readings(300.0, 25.0, 1, |_| false), params(5.0, 0.0)).unwrap();
        assert_eq!(windows.len(), 60);
        assert!(windows.iter().all(|w| w.len() == 125 && w.validate().is_ok()));
        assert_eq!(windows[59].start_t, 295.0);
    }

    #[test]
    fn incomplete_window_is_dropped() {
        let windows = make_windows(&readings(4.9, 25.0, 1, |_| false), params(5.0, 0.0)).unwrap();
        assert!(windows.is_empty());
    }

    #[test]
    fn half_overlap_steps_by_half_window() {
        let windows = make_windows(&readings(10.0, 25.0, 2, |_| false), params(5.0, 0.5)).unwrap();
        let starts: Vec<f64> = windows.iter().map(|w| w.start_t).collect();
        assert_eq!(starts, vec![0.0, 2.5, 5.0]);
        assert_eq!(windows[0].device_count(), 2);
    }

    #[test]
    fn small_gaps_hold_previous_value() {
        // 3 of 125 samples missing in the first window (2.4%).
        let windows = make_windows(&readings(5.0, 25.0, 1, |i| (10..13).contains(&i)), params(5.0, 0.0)).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(&windows[0].samples[0][9..14], &[9.0, 9.0, 9.0, 9.0, 13.0]);
    }

    #[test]
    fn large_gaps_drop_the_window() {
        let windows = make_windows(&readings(10.0, 25.0, 1, |i| (10..20).contains(&i)), params(5.0, 0.0)).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].start_t, 5.0);
    }

    #[test]
    fn incomplete_device_yields_nothing() {
        let mut r = readings(10.0, 25.0, 1, |_| false);
        r.retain(|x| x.signal.channel.index() != 4);
        assert!(make_windows(&r, params(5.0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn parameters_are_checked() {
        assert!(make_windows(&[], params(0.0, 0.0)).is_err());
        assert!(make_windows(&[], params(5.0, 1.0)).is_err());
        assert!(make_windows(&[], params(0.5, 0.0)).is_err());
        assert!(make_windows(&[], params(5.0, 0.0)).unwrap().is_empty());
    }
}
