//! Sensor ingest: per-device delimited files to match-relative readings.
//!
//! A device file is a header row followed by one row per sample. The
//! [`DeviceConfig`] maps source columns onto the nine canonical channels
//! (accelerometer, gyroscope, magnetometer × x/y/z); every other column
//! (orientation, free acceleration, status flags) is ignored.
//!
//! Timestamps in the file count from the moment the device was powered on.
//! [`synchronize`] turns them into seconds relative to the kickoff of the
//! period they fall in, so a reading five minutes before kickoff has
//! `t = -300`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for readings recorded before the first kickoff.
pub const DEFAULT_PRE_ROLL_S: f64 = 600.0;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Acc,
    Gyro,
    Mag,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [SensorKind::Acc, SensorKind::Gyro, SensorKind::Mag];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Acc => "acc",
            SensorKind::Gyro => "gyro",
            SensorKind::Mag => "mag",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// One of the nine canonical channels of a sensing device.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Channel {
    pub sensor: SensorKind,
    pub axis: Axis,
}

impl Channel {
    pub const COUNT: usize = 9;

    /// Canonical order: acc x/y/z, gyro x/y/z, mag x/y/z.
    pub fn all() -> impl Iterator<Item = Channel> {
        SensorKind::ALL
            .into_iter()
            .flat_map(|sensor| Axis::ALL.into_iter().map(move |axis| Channel { sensor, axis }))
    }

    pub fn index(self) -> usize {
        self.sensor as usize * 3 + self.axis as usize
    }

    pub fn from_index(index: usize) -> Option<Channel> {
        (index < Self::COUNT).then(|| Channel {
            sensor: SensorKind::ALL[index / 3],
            axis: Axis::ALL[index % 3],
        })
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.sensor.as_str(), self.axis.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Channel::all()
            .find(|c| c.to_string() == s.trim())
            .ok_or_else(|| Error::format(format!("unknown channel `{s}`")))
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Channel of a specific device worn by a player.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalId {
    pub device: u16,
    pub channel: Channel,
}

impl SignalId {
    /// Position of the signal in the flattened `device × channel` order.
    pub fn canonical_index(self) -> usize {
        self.device as usize * Channel::COUNT + self.channel.index()
    }
}

impl fmt::Display for SignalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dev{}.{}", self.device, self.channel)
    }
}

/// How the timestamp column of a device file is encoded.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormat {
    /// Seconds since power-on as a real number.
    #[default]
    Seconds,
    /// Integer sample counter; divided by the sample rate.
    SampleCounter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    /// Body position label, e.g. `left-knee`.
    pub device_slot: String,
    /// Source column name to canonical channel.
    pub column_map: BTreeMap<String, Channel>,
    pub time_column: String,
    #[serde(default)]
    pub time_format: TimeFormat,
    pub sample_rate_hz: f64,
    pub power_on_wall_time: DateTime<Utc>,
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::format("sample_rate_hz must be positive"));
        }
        let mut seen = [0usize; Channel::COUNT];
        for channel in self.column_map.values() {
            seen[channel.index()] += 1;
        }
        for (index, count) in seen.iter().enumerate() {
            let channel = Channel::from_index(index).unwrap();
            match count {
                0 => return Err(Error::format(format!("missing channel {channel}"))),
                1 => {}
                _ => return Err(Error::format(format!("channel {channel} mapped more than once"))),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodClock {
    pub period_id: u32,
    pub kickoff_wall_time: DateTime<Utc>,
    pub duration_s: f64,
}

impl PeriodClock {
    fn end(&self) -> DateTime<Utc> {
        self.kickoff_wall_time + chrono::Duration::nanoseconds((self.duration_s * 1e9).round() as i64)
    }
}

/// Checks ids, durations and ordering of a period list.
pub fn validate_clocks(clocks: &[PeriodClock]) -> Result<()> {
    if clocks.is_empty() {
        return Err(Error::argument("at least one period clock is required"));
    }
    for clock in clocks {
        if clock.period_id < 1 {
            return Err(Error::argument("period_id must be >= 1"));
        }
        if !(clock.duration_s > 0.0 && clock.duration_s.is_finite()) {
            return Err(Error::argument(format!("period {} duration must be positive", clock.period_id)));
        }
    }
    for pair in clocks.windows(2) {
        if pair[1].kickoff_wall_time < pair[0].end() {
            return Err(Error::argument(format!(
                "period {} overlaps or precedes period {}",
                pair[1].period_id, pair[0].period_id
            )));
        }
    }
    Ok(())
}

/// A reading as found in the device file, before clock alignment.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RawReading {
    pub device_relative_t: f64,
    pub channel: Channel,
    pub value: f64,
}

/// One sensed value of one player's device channel at match-relative `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorReading {
    pub player_id: Arc<str>,
    pub period_id: u32,
    /// Seconds since the kickoff of `period_id`; negative before kickoff.
    pub t: f64,
    pub signal: SignalId,
    pub value: f64,
}

pub(crate) fn detect_delimiter(header: &str) -> u8 {
    let count = |c: char| header.matches(c).count();
    [(b';', count(';')), (b'\t', count('\t')), (b',', count(','))]
        .into_iter()
        .max_by_key(|&(d, n)| (n, d == b','))
        .map(|(d, _)| d)
        .unwrap_or(b',')
}

/// Parses a device file into raw readings, nine per data row, in file order.
pub fn parse_sensor_file(raw: &[u8], config: &DeviceConfig) -> Result<Vec<RawReading>> {
    config.validate()?;
    let text = std::str::from_utf8(raw).map_err(|e| Error::format(format!("not utf-8: {e}")))?;
    let header = text.lines().next().filter(|l| !l.trim().is_empty());
    let Some(header) = header else {
        return Err(Error::format("empty sensor file"));
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::format(e.to_string()))?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(format!("missing column `{name}`")))
    };
    let time_idx = position(&config.time_column)?;
    let mut mapped: Vec<(usize, Channel)> = Vec::with_capacity(Channel::COUNT);
    for (column, channel) in &config.column_map {
        mapped.push((position(column)?, *channel));
    }
    mapped.sort_by_key(|&(_, ch)| ch.index());

    let mut out = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let cell = |idx: usize| -> Result<f64> {
            let token = record.get(idx).unwrap_or("");
            token.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Row {
                row,
                message: format!("non-numeric value `{token}` in column `{}`", &headers[idx]),
            })
        };
        let stamp = cell(time_idx)?;
        let t = match config.time_format {
            TimeFormat::Seconds => stamp,
            TimeFormat::SampleCounter => stamp / config.sample_rate_hz,
        };
        if t <= last_t {
            return Err(Error::Row { row, message: format!("timestamp {stamp} is not increasing") });
        }
        last_t = t;
        for &(idx, channel) in &mapped {
            out.push(RawReading { device_relative_t: t, channel, value: cell(idx)? });
        }
    }
    if out.is_empty() {
        return Err(Error::format("sensor file has no data rows"));
    }
    Ok(out)
}

/// Identifies whose device a file came from.
#[derive(Clone, Debug)]
pub struct DeviceRef {
    pub player_id: Arc<str>,
    /// Position of the device in the player's device list.
    pub device_index: u16,
}

#[derive(Copy, Clone, Debug)]
pub struct SyncOptions {
    pub pre_roll_s: f64,
}

impl Default for SyncOptions {
    fn default() -> Self {
        SyncOptions { pre_roll_s: DEFAULT_PRE_ROLL_S }
    }
}

/// Readings discarded by [`synchronize`], by reason.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub before_pre_roll: usize,
    pub between_periods: usize,
    pub after_last_period: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.before_pre_roll + self.between_periods + self.after_last_period
    }
}

#[derive(Clone, Debug)]
pub struct SyncOutput {
    pub readings: Vec<SensorReading>,
    pub dropped: DropCounts,
}

fn seconds_between(from: DateTime<Utc>, to: DateTime<Utc>) -> f64 {
    let delta = to - from;
    match delta.num_nanoseconds() {
        Some(ns) => ns as f64 / 1e9,
        None => delta.num_milliseconds() as f64 / 1e3,
    }
}

/// Aligns raw readings to match time.
///
/// A reading belongs to the period whose `[kickoff, kickoff + duration)`
/// interval contains it. Readings up to `pre_roll_s` before the first
/// kickoff are kept with negative `t`; readings between periods or after the
/// last one are dropped and counted.
pub fn synchronize(
    raw: &[RawReading],
    config: &DeviceConfig,
    device: &DeviceRef,
    clocks: &[PeriodClock],
    options: SyncOptions,
) -> Result<SyncOutput> {
    validate_clocks(clocks)?;
    // Kickoff offsets from power-on, computed in integer nanoseconds so that
    // absolute wall times never pass through f64.
    let offsets: Vec<f64> = clocks
        .iter()
        .map(|c| seconds_between(config.power_on_wall_time, c.kickoff_wall_time))
        .collect();

    let mut readings = Vec::with_capacity(raw.len());
    let mut dropped = DropCounts::default();
    for r in raw {
        let mut placed = None;
        for (clock, &offset) in clocks.iter().zip(&offsets) {
            let t = r.device_relative_t - offset;
            if t >= 0.0 && t < clock.duration_s {
                placed = Some((clock.period_id, t));
                break;
            }
        }
        let placed = placed.or_else(|| {
            let t = r.device_relative_t - offsets[0];
            (t < 0.0 && t >= -options.pre_roll_s).then_some((clocks[0].period_id, t))
        });
        match placed {
            Some((period_id, t)) => readings.push(SensorReading {
                player_id: device.player_id.clone(),
                period_id,
                t,
                signal: SignalId { device: device.device_index, channel: r.channel },
                value: r.value,
            }),
            None => {
                let first = r.device_relative_t - offsets[0];
                let last = r.device_relative_t - offsets[offsets.len() - 1];
                if first < 0.0 {
                    dropped.before_pre_roll += 1;
                } else if last >= clocks[clocks.len() - 1].duration_s {
                    dropped.after_last_period += 1;
                } else {
                    dropped.between_periods += 1;
                }
            }
        }
    }
    Ok(SyncOutput { readings, dropped })
}
