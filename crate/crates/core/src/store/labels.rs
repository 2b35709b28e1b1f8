use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ActivityPrediction;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Sensor,
    Manual,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Sensor => "sensor",
            LabelSource::Manual => "manual",
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensor" => Ok(LabelSource::Sensor),
            "manual" => Ok(LabelSource::Manual),
            other => Err(Error::argument(format!("unknown label source `{other}`"))),
        }
    }
}

/// A time span of one player labeled with an activity class. Times are
/// seconds since the kickoff of `period_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityLabelRow {
    /// Assigned by the store.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_id: Option<i64>,
    pub match_id: String,
    pub player: String,
    pub period_id: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub activity_class: String,
    pub source: LabelSource,
    /// Mean winning vote fraction over the merged windows (sensor rows only).
    pub vote_fraction: Option<f64>,
}

impl ActivityLabelRow {
    pub fn invalid_fields(&self, prefix: &str) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.start_s.is_finite() && self.end_s.is_finite() && self.start_s < self.end_s) {
            bad.push(format!("{prefix}.end_s"));
        }
        if self.period_id < 1 {
            bad.push(format!("{prefix}.period_id"));
        }
        if self.activity_class.is_empty() {
            bad.push(format!("{prefix}.activity_class"));
        }
        if (self.source == LabelSource::Sensor) != self.vote_fraction.is_some() {
            bad.push(format!("{prefix}.vote_fraction"));
        }
        bad
    }
}

/// Gap tolerated between windows that still count as consecutive.
const CONTIGUITY_EPS: f64 = 1e-6;

/// Collapses each player's per-period run of contiguous windows with the
/// same predicted class into one row.
pub fn merge_predictions(match_id: &str, predictions: &[ActivityPrediction]) -> Vec<ActivityLabelRow> {
    let mut streams: BTreeMap<(&str, u32), Vec<&ActivityPrediction>> = BTreeMap::new();
    for p in predictions {
        streams.entry((p.player_id.as_str(), p.window.period_id)).or_default().push(p);
    }
    let mut rows = Vec::new();
    for ((player, period_id), mut stream) in streams {
        stream.sort_by(|a, b| a.window.start_t.total_cmp(&b.window.start_t));
        let mut current: Option<(ActivityLabelRow, f64, usize)> = None;
        for p in stream {
            let winning = p.vote_fractions.iter().copied().fold(0.0, f64::max);
            if let Some((row, sum, n)) = current.as_mut() {
                if row.activity_class == p.predicted_class && p.window.start_t <= row.end_s + CONTIGUITY_EPS {
                    row.end_s = row.end_s.max(p.window.end_t());
                    *sum += winning;
                    *n += 1;
                    continue;
                }
            }
            if let Some((mut row, sum, n)) = current.take() {
                row.vote_fraction = Some(sum / n as f64);
                rows.push(row);
            }
            let row = ActivityLabelRow {
                label_id: None,
                match_id: match_id.to_string(),
                player: player.to_string(),
                period_id,
                start_s: p.window.start_t,
                end_s: p.window.end_t(),
                activity_class: p.predicted_class.clone(),
                source: LabelSource::Sensor,
                vote_fraction: None,
            };
            current = Some((row, winning, 1));
        }
        if let Some((mut row, sum, n)) = current {
            row.vote_fraction = Some(sum / n as f64);
            rows.push(row);
        }
    }
    rows
}
