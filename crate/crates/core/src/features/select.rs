use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FeatureVector;

/// Ranked feature subset kept for classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Chi-squared statistic of every feature.
    pub scores: Vec<f64>,
    /// Kept feature indices, by descending score then ascending index.
    pub selected: Vec<usize>,
}

impl FeatureSelection {
    pub fn k(&self) -> usize {
        self.selected.len()
    }
}

/// Chi-squared score of every feature against the class labels.
///
/// Features are min-max scaled to `[0, 1]` over the training set and the
/// scaled values are treated as per-class mass; a constant feature scores 0.
pub fn chi2_scores(train: &[&FeatureVector]) -> Result<Vec<f64>> {
    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for fv in train {
        let label = fv.label.as_deref().ok_or_else(|| Error::contract("chi-squared needs labeled vectors"))?;
        classes.insert(label, 0);
    }
    for (i, index) in classes.values_mut().enumerate() {
        *index = i;
    }
    let rows: Vec<&[f64]> = train.iter().map(|fv| fv.values.as_slice()).collect();
    let labels: Vec<usize> = train.iter().map(|fv| classes[fv.label.as_deref().unwrap()]).collect();
    chi2_scores_indexed(&rows, &labels, classes.len())
}

/// [`chi2_scores`] over raw rows with class indices in `0..class_count`.
pub fn chi2_scores_indexed(rows: &[&[f64]], labels: &[usize], class_count: usize) -> Result<Vec<f64>> {
    if rows.len() < 2 || rows.len() != labels.len() {
        return Err(Error::contract("chi-squared needs at least two labeled vectors"));
    }
    let mut support = vec![0usize; class_count];
    for &label in labels {
        *support
            .get_mut(label)
            .ok_or_else(|| Error::contract(format!("class index {label} out of range")))? += 1;
    }
    if support.iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::contract("chi-squared needs at least two distinct classes"));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::contract("feature vectors differ in arity"));
    }
    let total_rows = rows.len() as f64;

    let mut lo = vec![f64::INFINITY; width];
    let mut hi = vec![f64::NEG_INFINITY; width];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    // observed[class][feature]
    let mut observed = vec![vec![0.0; width]; class_count];
    for (row, &label) in rows.iter().zip(labels) {
        let mass = &mut observed[label];
        for (j, &v) in row.iter().enumerate() {
            let range = hi[j] - lo[j];
            if range > 0.0 {
                mass[j] += (v - lo[j]) / range;
            }
        }
    }
    let scores = (0..width)
        .map(|j| {
            let grand: f64 = observed.iter().map(|o| o[j]).sum();
            let mut score = 0.0;
            for (class, &n_c) in support.iter().enumerate() {
                let expected = grand * n_c as f64 / total_rows;
                if expected > 0.0 {
                    let diff = observed[class][j] - expected;
                    score += diff * diff / expected;
                }
            }
            score
        })
        .collect();
    Ok(scores)
}

/// Keeps the `k` best-scoring features; ties go to the lower index.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<FeatureSelection> {
    if k == 0 || k > scores.len() {
        return Err(Error::argument(format!("k = {k} must be in 1..={}", scores.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(FeatureSelection { scores: scores.to_vec(), selected: order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WindowRef;
    use proptest::prelude::*;

    fn fv(values: Vec<f64>, label: &str) -> FeatureVector {
        FeatureVector {
            values,
            subject: "s".into(),
            label: Some(label.into()),
            window: WindowRef { player_id: "s".into(), period_id: 1, start_t: 0.0, duration_s: 5.0 },
        }
    }

    #[test]
    fn constant_feature_scores_zero() {
        let data = [fv(vec![2.0, 0.0], "a"), fv(vec![2.0, 1.0], "b"), fv(vec![2.0, 1.0], "a")];
        let refs: Vec<&FeatureVector> = data.iter().collect();
        assert_eq!(chi2_scores(&refs).unwrap()[0], 0.0);
    }

    #[test]
    fn class_indicator_scores_class_size() {
        for m in [1usize, 3, 10] {
            let mut data = Vec::new();
            for _ in 0..m {
                data.push(fv(vec![1.0], "A"));
                data.push(fv(vec![0.0], "B"));
            }
            let refs: Vec<&FeatureVector> = data.iter().collect();
            let score = chi2_scores(&refs).unwrap()[0];
            assert!((score - m as f64).abs() < 1e-12, "m={m}: {score}");
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let data = [fv(vec![1.0], "a"), fv(vec![2.0], "a")];
        let refs: Vec<&FeatureVector> = data.iter().collect();
        assert!(matches!(chi2_scores(&refs), Err(Error::Contract(_))));
    }

    #[test]
    fn top_k_orders_by_score() {
        assert_eq!(select_top_k(&[3.0, 1.0, 2.0], 2).unwrap().selected, vec![0, 2]);
        assert_eq!(select_top_k(&[5.0, 5.0, 1.0], 1).unwrap().selected, vec![0]);
        assert_eq!(select_top_k(&[1.0, 3.0, 2.0], 3).unwrap().selected, vec![1, 2, 0]);
        assert!(matches!(select_top_k(&[1.0], 2), Err(Error::Argument(_))));
    }

    fn dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (2usize..30, 1usize..6).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, d), n),
                proptest::collection::vec(0usize..3, n).prop_map(|mut l| {
                    l[0] = 0;
                    l[1] = 1;
                    l
                }),
            )
        })
    }

    proptest! {
        #[test]
        fn scores_are_order_and_affine_invariant(
            (rows, labels) in dataset(),
            slope in 0.1f64..50.0,
            offset in -100.0f64..100.0,
            rotate in 0usize..30,
        ) {
            let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let base = chi2_scores_indexed(&refs, &labels, 3).unwrap();
            prop_assert!(base.iter().all(|&s| s >= 0.0));

            let k = rotate % rows.len();
            let mut rot_rows = rows.clone();
            let mut rot_labels = labels.clone();
            rot_rows.rotate_left(k);
            rot_labels.rotate_left(k);
            let rot_refs: Vec<&[f64]> = rot_rows.iter().map(Vec::as_slice).collect();
            let permuted = chi2_scores_indexed(&rot_refs, &rot_labels, 3).unwrap();

            let affine: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * slope + offset).collect()).collect();
            let aff_refs: Vec<&[f64]> = affine.iter().map(Vec::as_slice).collect();
            let rescaled = chi2_scores_indexed(&aff_refs, &labels, 3).unwrap();
            for j in 0..base.len() {
                prop_assert!((base[j] - permuted[j]).abs() <= 1e-9 * (1.0 + base[j]));
                prop_assert!((base[j] - rescaled[j]).abs() <= 1e-9 * (1.0 + base[j]));
            }
            let a = select_top_k(&base, base.len()).unwrap();
            let b = select_top_k(&base, base.len()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
