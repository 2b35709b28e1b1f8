//! Episode files: one manually annotated event per row under the header
//! `Episode,Match,Team,Start,End,Half,Description,Tags,Player,Notes`.
//!
//! `Start`/`End` are `minutes:seconds` from the kickoff of `Half` (minutes
//! may exceed 59, seconds may carry a fraction). `Tags` is `;`-joined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::detect_delimiter;

pub const EPISODE_FIELDS: [&str; 10] =
    ["Episode", "Match", "Team", "Start", "End", "Half", "Description", "Tags", "Player", "Notes"];

/// One annotated match event. Times are seconds since the kickoff of
/// `half`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: i64,
    pub match_id: String,
    pub team: String,
    pub start_s: f64,
    pub end_s: f64,
    pub half: u32,
    pub description: String,
    pub tags: Vec<String>,
    pub player: Option<String>,
    pub notes: String,
}

impl Episode {
    /// Field paths (under `prefix`) breaking the episode invariants.
    pub fn invalid_fields(&self, prefix: &str) -> Vec<String> {
        let mut bad = Vec::new();
        if self.match_id.is_empty() {
            bad.push(format!("{prefix}.match_id"));
        }
        if !(self.start_s.is_finite() && self.start_s >= 0.0) {
            bad.push(format!("{prefix}.start_s"));
        }
        if !(self.end_s.is_finite() && self.end_s >= self.start_s) {
            bad.push(format!("{prefix}.end_s"));
        }
        if self.half < 1 {
            bad.push(format!("{prefix}.half"));
        }
        if self.description.trim().is_empty() {
            bad.push(format!("{prefix}.description"));
        }
        bad
    }
}

/// `"12:34"` → 754. Seconds must be below 60.
pub fn parse_clock(token: &str) -> Option<f64> {
    let (m, s) = token.trim().split_once(':')?;
    if m.is_empty() || !m.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if whole.is_empty() || whole.len() > 2 || !digits(whole) || !digits(frac) || (s.contains('.') && frac.is_empty()) {
        return None;
    }
    let minutes: u64 = m.parse().ok()?;
    let seconds: f64 = s.parse().ok()?;
    (seconds < 60.0).then(|| minutes as f64 * 60.0 + seconds)
}

/// Inverse of [`parse_clock`]; whole seconds are zero-padded to two digits.
pub fn format_clock(seconds: f64) -> String {
    let minutes = (seconds / 60.0).floor();
    let rest = seconds - minutes * 60.0;
    if rest < 10.0 {
        format!("{minutes}:0{rest}")
    } else {
        format!("{minutes}:{rest}")
    }
}

pub fn parse_episode_file(bytes: &[u8]) -> Result<Vec<Episode>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::format(format!("episode file is not utf-8: {e}")))?;
    let header = text.lines().next().filter(|l| !l.trim().is_empty()).ok_or_else(|| Error::format("empty episode file"))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::format(e.to_string()))?.clone();
    let mut index = [0usize; 10];
    for (slot, name) in index.iter_mut().zip(EPISODE_FIELDS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::format(format!("missing field `{name}` in episode header")))?;
    }

    let mut episodes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Row { row, message: e.to_string() })?;
        let field = |k: usize| record.get(index[k]).unwrap_or("");
        let fail = |message: String| Error::Row { row, message };
        let clock = |k: usize| {
            parse_clock(field(k)).ok_or_else(|| fail(format!("bad time `{}` in {}", field(k), EPISODE_FIELDS[k])))
        };
        let episode = Episode {
            episode_id: field(0).parse().map_err(|_| fail(format!("bad episode id `{}`", field(0))))?,
            match_id: field(1).to_string(),
            team: field(2).to_string(),
            start_s: clock(3)?,
            end_s: clock(4)?,
            half: field(5).parse().ok().filter(|&h| h >= 1).ok_or_else(|| fail(format!("bad half `{}`", field(5))))?,
            description: field(6).to_string(),
            tags: field(7).split(';').map(str::trim).filter(|t| !t.is_empty()).map(str::to_string).collect(),
            player: Some(field(8)).filter(|p| !p.is_empty()).map(str::to_string),
            notes: field(9).to_string(),
        };
        let bad = episode.invalid_fields("episode");
        if !bad.is_empty() {
            return Err(fail(format!("invalid {}", bad.join(", "))));
        }
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Writes episodes in the same layout [`parse_episode_file`] reads.
pub fn write_episode_file(episodes: &[Episode]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::format(e.to_string());
    w.write_record(EPISODE_FIELDS).map_err(io)?;
    for e in episodes {
        w.write_record([
            e.episode_id.to_string(),
            e.match_id.clone(),
            e.team.clone(),
            format_clock(e.start_s),
            format_clock(e.end_s),
            e.half.to_string(),
            e.description.clone(),
            e.tags.join(";"),
            e.player.clone().unwrap_or_default(),
            e.notes.clone(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::format(e.to_string()))
}
