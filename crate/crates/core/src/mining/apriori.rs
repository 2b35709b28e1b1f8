use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{Entry, Itemset};

/// `count / total`, the one place supports are computed.
pub fn support_of(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

fn count_all(candidates: &[Vec<u32>], entries: &[Vec<u32>]) -> Vec<usize> {
    candidates.par_iter().map(|c| entries.iter().filter(|e| is_subset(c, e)).count()).collect()
}

/// Joins frequent (k-1)-itemsets sharing their first k-2 items, then drops
/// candidates with an infrequent (k-1)-subset. Input must be sorted.
fn candidates(frequent: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let known: HashSet<&[u32]> = frequent.iter().map(Vec::as_slice).collect();
    let mut out = Vec::new();
    for (i, a) in frequent.iter().enumerate() {
        let prefix = &a[..a.len() - 1];
        for b in &frequent[i + 1..] {
            if &b[..b.len() - 1] != prefix {
                break;
            }
            let mut c = a.clone();
            c.push(*b.last().unwrap());
            let pruned = (0..c.len()).any(|skip| {
                let sub: Vec<u32> = c.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &x)| x).collect();
                !known.contains(sub.as_slice())
            });
            if !pruned {
                out.push(c);
            }
        }
    }
    out
}

/// All itemsets with `support >= min_support`, ordered by size, then
/// lexicographically.
pub fn apriori(entries: &[Entry], min_support: f64) -> Result<Vec<Itemset>> {
    if entries.is_empty() {
        return Err(Error::argument("apriori needs at least one entry"));
    }
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::argument(format!("min_support must be in (0, 1], got {min_support}")));
    }
    let vocabulary: Vec<&str> =
        entries.iter().flat_map(|e| e.items.iter().map(String::as_str)).collect::<BTreeSet<_>>().into_iter().collect();
    // Ids follow lexicographic item order, so sorted id vectors compare like
    // the item lists they stand for.
    let encoded: Vec<Vec<u32>> = entries
        .iter()
        .map(|e| e.items.iter().map(|i| vocabulary.binary_search(&i.as_str()).unwrap() as u32).collect())
        .collect();
    let n = entries.len();
    let frequent_enough = |count: usize| support_of(count, n) >= min_support;

    let mut out = Vec::new();
    let mut level: Vec<Vec<u32>> = (0..vocabulary.len() as u32).map(|i| vec![i]).collect();
    while !level.is_empty() {
        let counts = count_all(&level, &encoded);
        let frequent: Vec<(Vec<u32>, usize)> =
            level.into_iter().zip(counts).filter(|&(_, count)| frequent_enough(count)).collect();
        for (ids, count) in &frequent {
            out.push(Itemset {
                items: ids.iter().map(|&i| vocabulary[i as usize].to_string()).collect(),
                support: support_of(*count, n),
                count: *count,
            });
        }
        let sets: Vec<Vec<u32>> = frequent.into_iter().map(|(ids, _)| ids).collect();
        level = candidates(&sets);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(rows: &[&[&str]]) -> Vec<Entry> {
        rows.iter().map(|r| Entry::from_items(r.iter().copied())).collect()
    }

    /// Every non-empty subset of the vocabulary, counted directly.
    fn powerset_oracle(entries: &[Entry], min_support: f64) -> Vec<(Vec<String>, usize)> {
        let vocab: Vec<String> = entries.iter().flat_map(|e| e.items.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut out = Vec::new();
        for mask in 1u32..(1 << vocab.len()) {
            let set: Vec<String> = (0..vocab.len()).filter(|b| mask & (1 << b) != 0).map(|b| vocab[b].clone()).collect();
            let count = entries.iter().filter(|e| e.contains_all(&set)).count();
            if count as f64 / entries.len() as f64 >= min_support {
                out.push((set, count));
            }
        }
        out.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
        out
    }

    #[test]
    fn small_corpus_matches_hand_enumeration() {
        let entries = corpus(&[&["A", "B"], &["A", "B"], &["A", "C"]]);
        let sets = apriori(&entries, 0.6).unwrap();
        let got: Vec<(Vec<&str>, f64)> =
            sets.iter().map(|s| (s.items.iter().map(String::as_str).collect(), s.support)).collect();
        assert_eq!(got, vec![(vec!["A"], 1.0), (vec!["B"], 2.0 / 3.0), (vec!["A", "B"], 2.0 / 3.0)]);
    }

    #[test]
    fn no_common_item_at_full_support() {
        let entries = corpus(&[&["A"], &["B"], &["C", "D"]]);
        assert!(apriori(&entries, 1.0).unwrap().is_empty());
    }

    #[test]
    fn threshold_is_inclusive() {
        let entries = corpus(&[&["A"], &["A"], &["B"], &["B"]]);
        assert_eq!(apriori(&entries, 0.5).unwrap().len(), 2);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(apriori(&[], 0.5), Err(Error::Argument(_))));
        let entries = corpus(&[&["A"]]);
        assert!(apriori(&entries, 0.0).is_err());
        assert!(apriori(&entries, 1.5).is_err());
    }

    #[test]
    fn join_needs_shared_prefix() {
        // {0,1},{0,2},{1,2} join to {0,1,2}; {1,3} has no partner.
        let c = candidates(&[vec![0, 1], vec![0, 2], vec![1, 2], vec![1, 3]]);
        assert_eq!(c, vec![vec![0, 1, 2]]);
        // {0,1,2} pruned because {1,2} is missing.
        assert!(candidates(&[vec![0, 1], vec![0, 2]]).is_empty());
    }

    fn arb_corpus() -> impl Strategy<Value = (Vec<Entry>, f64)> {
        let entry = prop::collection::btree_set(0u8..10, 1..6);
        (prop::collection::vec(entry, 1..50), 1u32..=20).prop_map(|(rows, s)| {
            let entries = rows.into_iter().map(|r| Entry::from_items(r.into_iter().map(|i| format!("i{i}")))).collect();
            (entries, s as f64 / 20.0)
        })
    }

    proptest! {
        #[test]
        fn equals_powerset_enumeration((entries, min_support) in arb_corpus()) {
            let got: Vec<(Vec<String>, usize)> =
                apriori(&entries, min_support).unwrap().into_iter().map(|s| (s.items, s.count)).collect();
            prop_assert_eq!(got, powerset_oracle(&entries, min_support));
        }
    }
}
