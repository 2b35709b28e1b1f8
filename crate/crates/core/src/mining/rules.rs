use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{support_of, AssociationRule, Entry, Itemset, RuleOrigin};

/// Confidence at or above `1 - CONFIDENCE_ONE_EPS` counts as exceptionless.
pub const CONFIDENCE_ONE_EPS: f64 = 1e-12;

/// `(1 - support(Y)) / (1 - confidence)`, `+inf` when confidence is 1.
pub fn conviction(consequent_support: f64, confidence: f64) -> f64 {
    if confidence >= 1.0 - CONFIDENCE_ONE_EPS {
        f64::INFINITY
    } else {
        (1.0 - consequent_support) / (1.0 - confidence)
    }
}

pub(crate) fn rule_order(a: &AssociationRule, b: &AssociationRule) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.antecedent.cmp(&b.antecedent))
        .then_with(|| a.consequent.cmp(&b.consequent))
}

/// Rules `X → Z∖X` for every frequent `Z` with two or more items and every
/// non-empty proper subset `X`, kept when confidence reaches
/// `min_confidence`. Sorted by confidence (descending), then antecedent and
/// consequent.
///
/// Itemset supports are recounted against `entries`; a mismatch or a
/// missing subset means the inputs did not come from the same mining run.
pub fn generate_rules(itemsets: &[Itemset], entries: &[Entry], min_confidence: f64) -> Result<Vec<AssociationRule>> {
    if entries.is_empty() {
        return Err(Error::argument("rule generation needs the mined entries"));
    }
    let n = entries.len();
    let recount: Vec<usize> =
        itemsets.par_iter().map(|s| entries.iter().filter(|e| e.contains_all(&s.items)).count()).collect();
    for (set, &count) in itemsets.iter().zip(&recount) {
        if count != set.count || (support_of(count, n) - set.support).abs() > 1e-12 {
            return Err(Error::argument(format!(
                "itemset {{{}}} has support {} but covers {count} of {n} entries",
                set.items.join(", "),
                set.support
            )));
        }
    }
    let support: HashMap<&[String], f64> = itemsets.iter().map(|s| (s.items.as_slice(), s.support)).collect();
    let lookup = |items: &[String]| {
        support.get(items).copied().ok_or_else(|| {
            Error::argument(format!("subset {{{}}} of a frequent itemset is missing", items.join(", ")))
        })
    };

    let mut rules = Vec::new();
    for z in itemsets.iter().filter(|s| s.items.len() >= 2) {
        let size = z.items.len();
        if size > 24 {
            return Err(Error::argument("itemsets above 24 items are not supported"));
        }
        for mask in 1u32..(1 << size) - 1 {
            let (x, y): (Vec<(usize, &String)>, Vec<(usize, &String)>) =
                z.items.iter().enumerate().partition(|(i, _)| mask & (1 << i) != 0);
            let x: Vec<String> = x.into_iter().map(|(_, s)| s.clone()).collect();
            let y: Vec<String> = y.into_iter().map(|(_, s)| s.clone()).collect();
            let confidence = z.support / lookup(&x)?;
            if confidence < min_confidence {
                continue;
            }
            rules.push(AssociationRule {
                conviction: Some(conviction(lookup(&y)?, confidence)),
                antecedent: x,
                consequent: y,
                support: Some(z.support),
                confidence,
                origin: RuleOrigin::Mined,
                level: None,
            });
        }
    }
    rules.sort_by(rule_order);
    Ok(rules)
}
