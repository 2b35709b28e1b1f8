//! Temporal entries, frequent itemsets and association rules.
//!
//! Episode descriptions and activity class names share one item namespace,
//! so `Pass` from an annotation and `Kicking` from the sensors can meet in
//! the same rule.

mod apriori;
mod entries;
mod manual;
mod rules;
mod rules_file;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use apriori::{apriori, support_of};
pub use entries::{build_entries, EntryParams, TimedItem};
pub use manual::{load_manual_rules, LevelMapping};
pub use rules::{conviction, generate_rules, CONFIDENCE_ONE_EPS};
pub use rules_file::{read_rules, write_rules, RULES_HEADER};

/// How rows are partitioned before windowing.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    PerPlayer,
    PerTeam,
    PerMatch,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::PerPlayer => "per-player",
            Scope::PerTeam => "per-team",
            Scope::PerMatch => "per-match",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-player" => Ok(Scope::PerPlayer),
            "per-team" => Ok(Scope::PerTeam),
            "per-match" => Ok(Scope::PerMatch),
            other => Err(Error::argument(format!("unknown scope `{other}`"))),
        }
    }
}

/// Items co-occurring in one window of one scope partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub items: BTreeSet<String>,
    pub match_id: String,
    /// Set for per-player entries.
    pub player: Option<String>,
    /// Player id, team name, or empty for per-match entries.
    pub scope_key: String,
    pub half: u32,
    pub start_s: f64,
    pub end_s: f64,
}

impl Entry {
    /// Bare entry for corpora that have no match context.
    pub fn from_items<I, S>(items: I) -> Entry
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Entry {
            items: items.into_iter().map(Into::into).collect(),
            match_id: String::new(),
            player: None,
            scope_key: String::new(),
            half: 1,
            start_s: 0.0,
            end_s: 1.0,
        }
    }

    pub fn contains_all(&self, items: &[String]) -> bool {
        items.iter().all(|i| self.items.contains(i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Itemset {
    /// Sorted, distinct.
    pub items: Vec<String>,
    pub support: f64,
    /// Number of entries containing every item.
    pub count: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleOrigin {
    Mined,
    Manual,
}

impl RuleOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleOrigin::Mined => "mined",
            RuleOrigin::Manual => "manual",
        }
    }
}

/// Qualitative confidence of an expert-authored rule.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    High,
    Medium,
    Low,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::High => "High",
            Level::Medium => "Medium",
            Level::Low => "Low",
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "High" => Ok(Level::High),
            "Medium" => Ok(Level::Medium),
            "Low" => Ok(Level::Low),
            other => Err(Error::format(format!("unknown level `{other}`"))),
        }
    }
}

/// `antecedent → consequent`. Manual rules have no support or conviction;
/// their confidence comes from the level mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub support: Option<f64>,
    pub confidence: f64,
    /// `+inf` for exceptionless rules; serialized as the string `"inf"`.
    #[serde(with = "conviction_serde")]
    pub conviction: Option<f64>,
    pub origin: RuleOrigin,
    pub level: Option<Level>,
}

impl AssociationRule {
    /// Same items on both sides, regardless of metrics.
    pub fn same_shape(&self, other: &AssociationRule) -> bool {
        self.antecedent == other.antecedent && self.consequent == other.consequent
    }
}

impl fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}} -> {{{}}}", self.antecedent.join(", "), self.consequent.join(", "))
    }
}

mod conviction_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            None => s.serialize_none(),
            Some(v) if v.is_infinite() => s.serialize_some(&Repr::Text("inf".into())),
            Some(v) => s.serialize_some(&Repr::Number(*v)),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Number(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("bad conviction `{t}`"))),
        }
    }
}

/// Everything `mine` needs besides the rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningParams {
    pub window_s: f64,
    pub step_s: f64,
    pub scope: Scope,
    pub min_support: f64,
    pub min_confidence: f64,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams { window_s: 10.0, step_s: 5.0, scope: Scope::PerPlayer, min_support: 0.01, min_confidence: 0.5 }
    }
}

impl MiningParams {
    pub fn entry_params(&self) -> EntryParams {
        EntryParams { window_s: self.window_s, step_s: self.step_s, scope: self.scope }
    }

    /// Field paths (under `prefix`) of every out-of-range parameter.
    pub fn invalid_fields(&self, prefix: &str) -> Vec<String> {
        let mut bad = Vec::new();
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            bad.push(format!("{prefix}.window_s"));
        }
        if !(self.step_s > 0.0 && self.step_s <= self.window_s) {
            bad.push(format!("{prefix}.step_s"));
        }
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            bad.push(format!("{prefix}.min_support"));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            bad.push(format!("{prefix}.min_confidence"));
        }
        bad
    }
}

/// Builds entries, mines itemsets and returns rules, in one call.
pub fn mine(rows: &[TimedItem], params: &MiningParams) -> Result<Vec<AssociationRule>> {
    let bad = params.invalid_fields("mining");
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let entries = build_entries(rows, &params.entry_params())?;
    if entries.is_empty() {
        return Err(Error::argument("no entries to mine"));
    }
    let itemsets = apriori(&entries, params.min_support)?;
    generate_rules(&itemsets, &entries, params.min_confidence)
}
