use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mining::{apriori, generate_rules};
use crate::synth::planted_corpus;

use super::{active_rules, detect, Thresholds};

/// Shape of the synthetic corpus and of the mining run over it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusParams {
    pub entries: usize,
    pub planted_rules: usize,
    /// Planted confidences are drawn uniformly from `[min_rule_confidence, 1]`.
    pub min_rule_confidence: f64,
    /// Chance that an entry carries a given rule's antecedent.
    pub antecedent_rate: f64,
    pub noise_items: usize,
    pub noise_rate: f64,
    pub mine_min_support: f64,
    pub mine_min_confidence: f64,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            entries: 2000,
            planted_rules: 10,
            min_rule_confidence: 0.85,
            antecedent_rate: 0.15,
            noise_items: 20,
            noise_rate: 0.08,
            mine_min_support: 0.02,
            mine_min_confidence: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutcome {
    /// Flagged corrupted entries over corrupted entries.
    pub recall: f64,
    /// Set when nothing was corrupted; `recall` is then 1 by convention.
    pub recall_vacuous: bool,
    /// Flagged clean entries over clean entries.
    pub false_positive_rate: f64,
    pub corrupted: usize,
    pub clean: usize,
    pub flagged_corrupted: usize,
    pub flagged_clean: usize,
    pub rules_mined: usize,
    pub rules_active: usize,
    /// Planted rules present among the active mined rules.
    pub planted_recovered: usize,
    /// Why the run could not detect anything, when that is the case.
    pub diagnostic: Option<String>,
}

/// Plants rules in a synthetic corpus, mines the clean corpus, deletes one
/// consequent from a `corruption_rate` share of the entries that carry a
/// complete planted rule, and measures how many of those the detector flags.
///
/// Entries sit on disjoint intervals, so each warning maps to one entry.
pub fn seeded_error_benchmark(
    params: &CorpusParams,
    corruption_rate: f64,
    thresholds: &Thresholds,
) -> Result<BenchmarkOutcome> {
    if !(0.0..1.0).contains(&corruption_rate) {
        return Err(Error::argument(format!("corruption_rate must be in [0, 1), got {corruption_rate}")));
    }
    thresholds.validate()?;
    let corpus = planted_corpus(params)?;
    let clean = corpus.entries;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0xC0_22_0F);
    let bearing: Vec<usize> = (0..clean.len())
        .filter(|&i| corpus.planted.iter().any(|r| clean[i].contains_all(&[r.antecedent.clone(), r.consequent.clone()])))
        .collect();
    let wanted = (corruption_rate * clean.len() as f64).round() as usize;
    let mut chosen = bearing.clone();
    chosen.shuffle(&mut rng);
    chosen.truncate(wanted);
    chosen.sort_unstable();

    let mut corrupted = clean.clone();
    for &i in &chosen {
        let present: Vec<_> = corpus
            .planted
            .iter()
            .filter(|r| clean[i].contains_all(&[r.antecedent.clone(), r.consequent.clone()]))
            .collect();
        let rule = present[rng.random_range(0..present.len())];
        corrupted[i].items.remove(&rule.consequent);
    }

    let itemsets = apriori(&clean, params.mine_min_support)?;
    let rules = generate_rules(&itemsets, &clean, params.mine_min_confidence)?;
    let active = active_rules(&rules, thresholds);
    let planted_recovered = corpus
        .planted
        .iter()
        .filter(|p| active.iter().any(|r| r.antecedent == [p.antecedent.clone()] && r.consequent == [p.consequent.clone()]))
        .count();

    let warnings = detect(&corrupted, &active, &Thresholds::default());
    let mut flagged = vec![false; corrupted.len()];
    for w in &warnings {
        for (i, e) in corrupted.iter().enumerate() {
            if e.start_s >= w.start_s && e.end_s <= w.end_s {
                flagged[i] = true;
            }
        }
    }
    let mut is_corrupted = vec![false; clean.len()];
    for &i in &chosen {
        is_corrupted[i] = true;
    }
    let flagged_corrupted = chosen.iter().filter(|&&i| flagged[i]).count();
    let flagged_clean = (0..clean.len()).filter(|&i| !is_corrupted[i] && flagged[i]).count();
    let clean_count = clean.len() - chosen.len();

    let diagnostic = if active.is_empty() {
        Some(format!(
            "no rules survive mining (min_support {}, min_confidence {}) and the thresholds",
            params.mine_min_support, params.mine_min_confidence
        ))
    } else if bearing.is_empty() {
        Some("no entry carries a complete planted rule; nothing to corrupt".into())
    } else {
        None
    };

    Ok(BenchmarkOutcome {
        recall: if chosen.is_empty() { 1.0 } else { flagged_corrupted as f64 / chosen.len() as f64 },
        recall_vacuous: chosen.is_empty(),
        false_positive_rate: if clean_count == 0 { 0.0 } else { flagged_clean as f64 / clean_count as f64 },
        corrupted: chosen.len(),
        clean: clean_count,
        flagged_corrupted,
        flagged_clean,
        rules_mined: rules.len(),
        rules_active: active.len(),
        planted_recovered,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::Entry;

    fn disjoint(entries: &[Entry]) -> bool {
        entries.windows(2).all(|w| w[0].end_s < w[1].start_s)
    }

    fn strict() -> Thresholds {
        Thresholds { min_confidence: Some(0.8), ..Default::default() }
    }

    #[test]
    fn detects_planted_corruption() {
        let out = seeded_error_benchmark(&CorpusParams { seed: 3, ..Default::default() }, 0.05, &strict()).unwrap();
        assert_eq!(out.corrupted, 100);
        assert_eq!(out.planted_recovered, 10);
        assert!(out.recall >= 0.9, "{out:?}");
        assert!(out.false_positive_rate < 0.2, "{out:?}");
        assert!(out.diagnostic.is_none());
    }

    #[test]
    fn exceptionless_rules_give_full_recall() {
        let params = CorpusParams { min_rule_confidence: 1.0, seed: 11, ..Default::default() };
        let out = seeded_error_benchmark(&params, 0.05, &strict()).unwrap();
        assert_eq!(out.recall, 1.0);
        assert!(!out.recall_vacuous);
    }

    #[test]
    fn zero_corruption_is_vacuous() {
        let out = seeded_error_benchmark(&CorpusParams::default(), 0.0, &strict()).unwrap();
        assert_eq!(out.corrupted, 0);
        assert!(out.recall_vacuous);
        assert_eq!(out.recall, 1.0);
        assert_eq!(out.clean, 2000);
    }

    #[test]
    fn fixed_seed_is_repeatable() {
        let p = CorpusParams { entries: 600, seed: 8, ..Default::default() };
        assert_eq!(seeded_error_benchmark(&p, 0.05, &strict()).unwrap(), seeded_error_benchmark(&p, 0.05, &strict()).unwrap());
    }

    #[test]
    fn unreachable_thresholds_produce_a_diagnostic() {
        let th = Thresholds { min_support: Some(0.99), ..Default::default() };
        let out = seeded_error_benchmark(&CorpusParams { entries: 300, ..Default::default() }, 0.05, &th).unwrap();
        assert!(out.diagnostic.is_some());
        assert_eq!(out.rules_active, 0);
        assert_eq!(out.recall, 0.0);
    }

    #[test]
    fn corpus_entries_are_disjoint() {
        let corpus = planted_corpus(&CorpusParams { entries: 50, ..Default::default() }).unwrap();
        assert!(disjoint(&corpus.entries));
    }

    #[test]
    fn rate_out_of_range() {
        assert!(seeded_error_benchmark(&CorpusParams::default(), 1.0, &strict()).is_err());
    }
}
