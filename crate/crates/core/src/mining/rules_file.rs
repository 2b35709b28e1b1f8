//! Pipe-delimited rules file:
//!
//! ```text
//! # window_s=10 step_s=5 scope=per-player min_support=0.01 min_confidence=0.5
//! antecedent|consequent|support|confidence|conviction|origin|level
//! Construction;Reception|Pass|0.01383|0.90036|1.95564|mined|
//! Pass|Kicking||0.9||manual|High
//! ```
//!
//! Items are `;`-joined, absent metrics are empty, infinite conviction is
//! `inf`. Lines starting with `#` are comments.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::{AssociationRule, MiningParams, RuleOrigin};

pub const RULES_HEADER: &str = "antecedent|consequent|support|confidence|conviction|origin|level";

fn join_items(items: &[String]) -> Result<String> {
    if let Some(bad) = items.iter().find(|i| i.contains(['|', ';', '\n']) || i.is_empty() || i.starts_with('#')) {
        return Err(Error::argument(format!("item `{bad}` cannot be written to a rules file")));
    }
    Ok(items.join(";"))
}

fn number(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        v.to_string()
    }
}

/// Renders rules in order. `params`, when given, is recorded as a leading
/// comment.
pub fn write_rules(rules: &[AssociationRule], params: Option<&MiningParams>) -> Result<String> {
    let mut out = String::new();
    if let Some(p) = params {
        writeln!(
            out,
            "# window_s={} step_s={} scope={} min_support={} min_confidence={}",
            p.window_s, p.step_s, p.scope, p.min_support, p.min_confidence
        )
        .unwrap();
    }
    out.push_str(RULES_HEADER);
    out.push('\n');
    for r in rules {
        writeln!(
            out,
            "{}|{}|{}|{}|{}|{}|{}",
            join_items(&r.antecedent)?,
            join_items(&r.consequent)?,
            r.support.map(number).unwrap_or_default(),
            number(r.confidence),
            r.conviction.map(number).unwrap_or_default(),
            r.origin.as_str(),
            r.level.map(|l| l.as_str()).unwrap_or_default(),
        )
        .unwrap();
    }
    Ok(out)
}

fn parse_number(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    match field {
        "" => Ok(None),
        "inf" => Ok(Some(f64::INFINITY)),
        s => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| Error::Row { row: line, message: format!("bad {name} `{s}`") }),
    }
}

fn parse_items(field: &str, line: usize, name: &str) -> Result<Vec<String>> {
    let mut items: Vec<String> = field.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect();
    items.sort();
    items.dedup();
    if items.is_empty() {
        return Err(Error::Row { row: line, message: format!("empty {name}") });
    }
    Ok(items)
}

/// Parses a rules file. Row numbers in errors count data rows from 1.
pub fn read_rules(text: &str) -> Result<Vec<AssociationRule>> {
    let mut lines = text.lines().map(str::trim_end).filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == RULES_HEADER => {}
        Some(h) => return Err(Error::format(format!("unexpected rules header `{h}`"))),
        None => return Err(Error::format("empty rules file")),
    }
    let mut rules = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        let f: Vec<&str> = line.split('|').map(str::trim).collect();
        if f.len() != 7 {
            return Err(Error::Row { row, message: format!("expected 7 fields, got {}", f.len()) });
        }
        let origin = match f[5] {
            "mined" => RuleOrigin::Mined,
            "manual" => RuleOrigin::Manual,
            other => return Err(Error::Row { row, message: format!("bad origin `{other}`") }),
        };
        let level = match f[6] {
            "" => None,
            s => Some(s.parse().map_err(|e: Error| Error::Row { row, message: e.to_string() })?),
        };
        let rule = AssociationRule {
            antecedent: parse_items(f[0], row, "antecedent")?,
            consequent: parse_items(f[1], row, "consequent")?,
            support: parse_number(f[2], row, "support")?,
            confidence: parse_number(f[3], row, "confidence")?
                .ok_or_else(|| Error::Row { row, message: "missing confidence".into() })?,
            conviction: parse_number(f[4], row, "conviction")?,
            origin,
            level,
        };
        if rule.antecedent.iter().any(|a| rule.consequent.contains(a)) {
            return Err(Error::Row { row, message: "antecedent and consequent overlap".into() });
        }
        rules.push(rule);
    }
    Ok(rules)
}
