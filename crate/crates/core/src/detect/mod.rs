//! Replays association rules against entries and raises warnings where an
//! antecedent is present but the consequent is not.

mod benchmark;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::{AssociationRule, Entry};

pub use benchmark::{seeded_error_benchmark, BenchmarkOutcome, CorpusParams};

/// Sensitivity chosen by the annotator. Absent thresholds do not filter.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_support: Option<f64>,
    pub min_confidence: Option<f64>,
    pub min_conviction: Option<f64>,
}

impl Thresholds {
    /// Field paths (`thresholds.min_confidence`, …) of out-of-range values.
    pub fn invalid_fields(&self) -> Vec<String> {
        let unit = |v: Option<f64>| v.is_none_or(|v| (0.0..=1.0).contains(&v));
        let mut bad = Vec::new();
        if !unit(self.min_support) {
            bad.push("thresholds.min_support".to_string());
        }
        if !unit(self.min_confidence) {
            bad.push("thresholds.min_confidence".to_string());
        }
        if !self.min_conviction.is_none_or(|v| v >= 0.0) {
            bad.push("thresholds.min_conviction".to_string());
        }
        bad
    }

    pub fn validate(&self) -> Result<()> {
        let bad = self.invalid_fields();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn admits(&self, rule: &AssociationRule) -> bool {
        let passes = |threshold: Option<f64>, metric: Option<f64>| match (threshold, metric) {
            (Some(t), Some(m)) => m >= t,
            _ => true,
        };
        passes(self.min_support, rule.support)
            && passes(self.min_confidence, Some(rule.confidence))
            && passes(self.min_conviction, rule.conviction)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarningState {
    Open,
    Fixed,
    Dismissed,
}

impl WarningState {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningState::Open => "open",
            WarningState::Fixed => "fixed",
            WarningState::Dismissed => "dismissed",
        }
    }
}

impl fmt::Display for WarningState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WarningState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(WarningState::Open),
            "fixed" => Ok(WarningState::Fixed),
            "dismissed" => Ok(WarningState::Dismissed),
            other => Err(Error::argument(format!("unknown warning state `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub warning_id: i64,
    pub match_id: String,
    pub player: Option<String>,
    pub scope_key: String,
    pub half: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub rule: AssociationRule,
    pub present_items: Vec<String>,
    pub missing_items: Vec<String>,
    pub severity: f64,
    pub state: WarningState,
}

impl Warning {
    /// Same rule, place and interval; ids, severity and state aside.
    pub fn same_finding(&self, other: &Warning) -> bool {
        self.rule.same_shape(&other.rule)
            && self.match_id == other.match_id
            && self.scope_key == other.scope_key
            && self.half == other.half
            && self.start_s == other.start_s
            && self.end_s == other.end_s
    }
}

pub fn active_rules(rules: &[AssociationRule], thresholds: &Thresholds) -> Vec<AssociationRule> {
    rules.iter().filter(|r| thresholds.admits(r)).cloned().collect()
}

pub fn violates(rule: &AssociationRule, entry: &Entry) -> bool {
    entry.contains_all(&rule.antecedent) && !entry.contains_all(&rule.consequent)
}

/// Warnings for every active rule violated by some entry. Violations of one
/// rule in one (match, half, scope key) whose intervals overlap or touch
/// become a single warning over their union. Sorted by start, then severity
/// descending; ids are assigned from 1 in that order.
pub fn detect(entries: &[Entry], rules: &[AssociationRule], thresholds: &Thresholds) -> Vec<Warning> {
    let active = active_rules(rules, thresholds);
    type Key<'a> = (usize, &'a str, u32, &'a str);
    let mut violations: BTreeMap<Key<'_>, Vec<&Entry>> = BTreeMap::new();
    for entry in entries {
        for (r, rule) in active.iter().enumerate() {
            if violates(rule, entry) {
                violations.entry((r, &entry.match_id, entry.half, &entry.scope_key)).or_default().push(entry);
            }
        }
    }

    let mut warnings = Vec::new();
    for ((r, _, _, _), mut group) in violations {
        let rule = &active[r];
        group.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
        let mut run: Vec<&Entry> = Vec::new();
        let mut run_end = f64::NEG_INFINITY;
        for entry in group {
            if !run.is_empty() && entry.start_s > run_end {
                warnings.push(merge(rule, &run));
                run.clear();
            }
            run_end = if run.is_empty() { entry.end_s } else { run_end.max(entry.end_s) };
            run.push(entry);
        }
        if !run.is_empty() {
            warnings.push(merge(rule, &run));
        }
    }
    warnings.sort_by(warning_order);
    for (i, w) in warnings.iter_mut().enumerate() {
        w.warning_id = i as i64 + 1;
    }
    warnings
}

fn merge(rule: &AssociationRule, run: &[&Entry]) -> Warning {
    let first = run[0];
    let mut present: BTreeSet<&String> = first.items.iter().collect();
    for e in &run[1..] {
        present.retain(|i| e.items.contains(*i));
    }
    let missing = rule.consequent.iter().filter(|c| !present.contains(c)).cloned().collect();
    Warning {
        warning_id: 0,
        match_id: first.match_id.clone(),
        player: first.player.clone(),
        scope_key: first.scope_key.clone(),
        half: first.half,
        start_s: first.start_s,
        end_s: run.iter().map(|e| e.end_s).fold(f64::NEG_INFINITY, f64::max),
        rule: rule.clone(),
        present_items: present.into_iter().cloned().collect(),
        missing_items: missing,
        severity: rule.confidence,
        state: WarningState::Open,
    }
}

/// Start ascending, severity descending, then a stable total order.
pub fn warning_order(a: &Warning, b: &Warning) -> std::cmp::Ordering {
    a.start_s
        .total_cmp(&b.start_s)
        .then(b.severity.total_cmp(&a.severity))
        .then_with(|| a.match_id.cmp(&b.match_id))
        .then(a.half.cmp(&b.half))
        .then_with(|| a.scope_key.cmp(&b.scope_key))
        .then_with(|| a.rule.antecedent.cmp(&b.rule.antecedent))
        .then_with(|| a.rule.consequent.cmp(&b.rule.consequent))
        .then(a.end_s.total_cmp(&b.end_s))
        .then(a.warning_id.cmp(&b.warning_id))
}

/// Warnings as a pretty JSON array with a trailing newline.
pub fn export_warnings(warnings: &[Warning]) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(warnings)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_warnings(bytes: &[u8]) -> Result<Vec<Warning>> {
    Ok(serde_json::from_slice(bytes)?)
}
