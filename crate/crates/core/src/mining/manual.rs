use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AssociationRule, Level, RuleOrigin};

/// Numeric confidence assigned to each qualitative level.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelMapping {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl Default for LevelMapping {
    fn default() -> Self {
        LevelMapping { high: 0.9, medium: 0.6, low: 0.3 }
    }
}

impl LevelMapping {
    pub fn confidence(&self, level: Level) -> f64 {
        match level {
            Level::High => self.high,
            Level::Medium => self.medium,
            Level::Low => self.low,
        }
    }

    pub fn invalid_fields(&self, prefix: &str) -> Vec<String> {
        [("high", self.high), ("medium", self.medium), ("low", self.low)]
            .into_iter()
            .filter(|(_, v)| !(0.0..=1.0).contains(v))
            .map(|(k, _)| format!("{prefix}.{k}"))
            .collect()
    }
}

fn item_set(text: &str, line: usize) -> Result<Vec<String>> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::format(format!("line {line}: expected `{{…}}`, got `{}`", text.trim())))?;
    let items: BTreeSet<String> =
        inner.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
    if items.is_empty() {
        return Err(Error::format(format!("line {line}: empty item set")));
    }
    Ok(items.into_iter().collect())
}

/// Parses expert rules, one `{A, B} -> {C} : Level` per line. Blank lines
/// and `#` comments are ignored.
pub fn load_manual_rules(document: &str, mapping: &LevelMapping) -> Result<Vec<AssociationRule>> {
    let mut rules = Vec::new();
    for (i, raw) in document.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (body, level) = line
            .rsplit_once(':')
            .ok_or_else(|| Error::format(format!("line {line_no}: missing `: Level`")))?;
        let level: Level = level.trim().parse().map_err(|e| Error::format(format!("line {line_no}: {e}")))?;
        let (x, y) = body
            .split_once("->")
            .ok_or_else(|| Error::format(format!("line {line_no}: missing `->`")))?;
        let antecedent = item_set(x, line_no)?;
        let consequent = item_set(y, line_no)?;
        if let Some(shared) = antecedent.iter().find(|a| consequent.contains(a)) {
            return Err(Error::format(format!("line {line_no}: `{shared}` on both sides of the rule")));
        }
        rules.push(AssociationRule {
            antecedent,
            consequent,
            support: None,
            confidence: mapping.confidence(level),
            conviction: None,
            origin: RuleOrigin::Manual,
            level: Some(level),
        });
    }
    Ok(rules)
}
