//! Random forest activity classifier.
//!
//! Each tree is grown on a bootstrap resample of the training vectors using
//! Gini impurity over the selected features. At every node a random subset
//! of `features_per_split` candidate features is examined; thresholds are
//! midpoints between adjacent distinct values. Trees vote with the majority
//! class of the leaf they route a vector to.
//!
//! Training is deterministic: tree `i` draws from a ChaCha8 stream seeded by
//! a mix of `(seed, i)`, so trees can be grown in parallel without changing
//! the result.

mod codec;
mod tree;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSelection, FeatureVector, WindowRef};

pub use codec::{deserialize, serialize, MAGIC, VERSION};
pub use tree::{Node, Tree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per split; `None` means `⌊√d⌋` of the `d` selected.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: None, min_samples_split: 2, features_per_split: None, seed: 0 }
    }
}

impl ForestParams {
    fn resolved_features_per_split(&self, d: usize) -> Result<usize> {
        let m = self.features_per_split.unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1));
        if m == 0 || m > d {
            return Err(Error::argument(format!("features_per_split = {m} must be in 1..={d}")));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_trees == 0 {
            bad.push("n_trees".to_string());
        }
        if self.min_samples_split < 2 {
            bad.push("min_samples_split".to_string());
        }
        if self.features_per_split == Some(0) {
            bad.push("features_per_split".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }
}

/// Anything that turns a feature vector into per-class vote fractions.
pub trait Classifier: Send + Sync {
    fn classes(&self) -> &[String];

    /// Per-class fractions aligned with [`Classifier::classes`], summing to 1.
    fn vote_fractions(&self, values: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, vector: &FeatureVector) -> Result<ActivityPrediction> {
        let vote_fractions = self.vote_fractions(&vector.values)?;
        let best = argmax_lowest(&vote_fractions);
        Ok(ActivityPrediction {
            player_id: vector.window.player_id.clone(),
            window: vector.window.clone(),
            predicted_class: self.classes()[best].clone(),
            vote_fractions,
        })
    }
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivityPrediction {
    pub player_id: String,
    pub window: WindowRef,
    pub predicted_class: String,
    pub vote_fractions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub classes: Vec<String>,
    pub selection: FeatureSelection,
    /// Length of the feature vectors the model was trained on.
    pub arity: usize,
}

impl ForestModel {
    /// Index of the majority vote and the vote fractions.
    pub fn vote(&self, values: &[f64]) -> Result<(usize, Vec<f64>)> {
        if values.len() != self.arity {
            return Err(Error::argument(format!(
                "vector has {} features, model expects {}",
                values.len(),
                self.arity
            )));
        }
        let mut votes = vec![0u32; self.classes.len()];
        for tree in &self.trees {
            votes[tree.vote(values)] += 1;
        }
        let total = self.trees.len() as f64;
        let fractions: Vec<f64> = votes.iter().map(|&v| v as f64 / total).collect();
        Ok((argmax_lowest(&fractions), fractions))
    }
}

impl Classifier for ForestModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn vote_fractions(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.vote(values).map(|(_, f)| f)
    }
}

pub fn predict(model: &ForestModel, vector: &FeatureVector) -> Result<ActivityPrediction> {
    model.predict(vector)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn tree_seed(seed: u64, tree_index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(tree_index as u64))
}

/// Trains a forest on labeled vectors restricted to `selection.selected`.
///
/// Classes are ordered naturally (`A2` before `A10`).
pub fn train(vectors: &[&FeatureVector], selection: &FeatureSelection, params: &ForestParams) -> Result<ForestModel> {
    let mut labels_seen = BTreeSet::new();
    for v in vectors {
        let label = v.label.as_deref().ok_or_else(|| Error::argument("training vectors must be labeled"))?;
        labels_seen.insert(label);
    }
    let mut classes: Vec<String> = labels_seen.into_iter().map(str::to_string).collect();
    classes.sort_by(|a, b| crate::natural_cmp(a, b));
    let labels: Vec<usize> = vectors
        .iter()
        .map(|v| classes.iter().position(|c| Some(c.as_str()) == v.label.as_deref()).unwrap())
        .collect();
    let rows: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
    train_indexed(&rows, &labels, classes, selection, params)
}

/// [`train`] over raw rows and class indices into `classes`.
pub fn train_indexed(
    rows: &[&[f64]],
    labels: &[usize],
    classes: Vec<String>,
    selection: &FeatureSelection,
    params: &ForestParams,
) -> Result<ForestModel> {
    params.validate()?;
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::argument("need one label per training vector"));
    }
    let arity = rows[0].len();
    if rows.iter().any(|r| r.len() != arity) {
        return Err(Error::argument("training vectors differ in arity"));
    }
    if labels.iter().any(|&l| l >= classes.len()) {
        return Err(Error::argument("label index outside class list"));
    }
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::argument("training data must contain at least two classes"));
    }
    if selection.selected.is_empty() || selection.selected.iter().any(|&f| f >= arity) {
        return Err(Error::argument("feature selection does not fit the training vectors"));
    }
    let features_per_split = params.resolved_features_per_split(selection.selected.len())?;
    let settings = tree::GrowSettings {
        features: &selection.selected,
        features_per_split,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        class_count: classes.len(),
    };
    let n = rows.len();
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            tree::grow(rows, labels, bootstrap, &settings, &mut rng)
        })
        .collect();
    Ok(ForestModel { trees, classes, selection: selection.clone(), arity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::select_top_k;
    use rand::Rng;

    pub(crate) fn labeled(values: Vec<f64>, label: &str) -> FeatureVector {
        FeatureVector {
            values,
            subject: "s".into(),
            label: Some(label.into()),
            window: WindowRef { player_id: "s".into(), period_id: 1, start_t: 0.0, duration_s: 5.0 },
        }
    }

    fn all_features(d: usize) -> FeatureSelection {
        select_top_k(&vec![1.0; d], d).unwrap()
    }

    fn separable() -> Vec<FeatureVector> {
        (0..10)
            .map(|i| {
                let x = i as f64;
                labeled(vec![x, 2.0 * x + 1.0], if i < 5 { "A" } else { "B" })
            })
            .collect()
    }

    fn accuracy(model: &ForestModel, data: &[FeatureVector]) -> f64 {
        let hits = data
            .iter()
            .filter(|v| model.predict(v).unwrap().predicted_class == *v.label.as_ref().unwrap())
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn separable_points_are_memorized() {
        let data = separable();
        let refs: Vec<&FeatureVector> = data.iter().collect();
        let model = train(&refs, &all_features(2), &ForestParams { seed: 1, ..Default::default() }).unwrap();
        assert_eq!(accuracy(&model, &data), 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<FeatureVector> = (0..4).map(|i| labeled(vec![i as f64], "A")).collect();
        let refs: Vec<&FeatureVector> = data.iter().collect();
        assert!(matches!(train(&refs, &all_features(1), &ForestParams::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let data = vec![labeled(vec![1.0, 2.0], "A"), labeled(vec![1.0], "B")];
        let refs: Vec<&FeatureVector> = data.iter().collect();
        assert!(matches!(train(&refs, &all_features(1), &ForestParams::default()), Err(Error::Argument(_))));

        let data = separable();
        let refs: Vec<&FeatureVector> = data.iter().collect();
        let model = train(&refs, &all_features(2), &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        assert!(matches!(model.predict(&labeled(vec![1.0], "A")), Err(Error::Argument(_))));
    }

    #[test]
    fn same_seed_same_predictions() {
        let data = separable();
        let refs: Vec<&FeatureVector> = data.iter().collect();
        let params = ForestParams { n_trees: 30, seed: 99, ..Default::default() };
        let a = train(&refs, &all_features(2), &params).unwrap();
        let b = train(&refs, &all_features(2), &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let probe = labeled(vec![rng.random_range(-2.0..12.0), rng.random_range(-2.0..25.0)], "A");
            assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap());
        }
        assert_eq!(serialize(&a), serialize(&b));
    }

    #[test]
    fn xor_replicated_is_learned() {
        let mut data = Vec::new();
        for _ in 0..25 {
            for (x, y, c) in [(0.0, 0.0, "A"), (0.0, 1.0, "B"), (1.0, 0.0, "B"), (1.0, 1.0, "A")] {
                data.push(labeled(vec![x, y], c));
            }
        }
        let refs: Vec<&FeatureVector> = data.iter().collect();
        let model = train(&refs, &all_features(2), &ForestParams { seed: 4, ..Default::default() }).unwrap();
        assert_eq!(accuracy(&model, &data), 1.0);
    }

    #[test]
    fn two_tree_tie_goes_to_lower_class() {
        let leaf = |counts: Vec<u32>| Tree { nodes: vec![Node::Leaf { counts }] };
        let model = ForestModel {
            trees: vec![leaf(vec![0, 3]), leaf(vec![5, 1])],
            classes: vec!["A".into(), "B".into()],
            selection: all_features(1),
            arity: 1,
        };
        let p = model.predict(&labeled(vec![0.0], "A")).unwrap();
        assert_eq!(p.vote_fractions, vec![0.5, 0.5]);
        assert_eq!(p.predicted_class, "A");
    }

    #[test]
    fn training_points_get_their_own_label() {
        // Clusters separated on both features, so the first split of every
        // tree already isolates them.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut data = Vec::new();
        for i in 0..60 {
            let (c, label) = if i % 2 == 0 { (0.0, "A") } else { (10.0, "B") };
            data.push(labeled(vec![c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)], label));
        }
        let refs: Vec<&FeatureVector> = data.iter().collect();
        for seed in 0..5 {
            let model = train(&refs, &all_features(2), &ForestParams { seed, ..Default::default() }).unwrap();
            for v in &data {
                let p = model.predict(v).unwrap();
                let own = model.classes.iter().position(|c| c == v.label.as_ref().unwrap()).unwrap();
                assert_eq!(&p.predicted_class, v.label.as_ref().unwrap());
                assert!(p.vote_fractions[own] >= 0.9);
                assert!((p.vote_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn splits_only_use_selected_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data: Vec<FeatureVector> = (0..80)
            .map(|i| {
                let v: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
                labeled(v, ["A", "B", "C"][i % 3])
            })
            .collect();
        let refs: Vec<&FeatureVector> = data.iter().collect();
        let selection = FeatureSelection { scores: vec![0.0; 6], selected: vec![4, 1, 3] };
        let model = train(&refs, &selection, &ForestParams { n_trees: 20, ..Default::default() }).unwrap();
        for tree in &model.trees {
            for node in &tree.nodes {
                match node {
                    Node::Split { feature, .. } => assert!(selection.selected.contains(&(*feature as usize))),
                    Node::Leaf { counts } => assert!(counts.iter().sum::<u32>() > 0),
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_dataset() -> impl Strategy<Value = Vec<(Vec<f64>, usize)>> {
            proptest::collection::vec((proptest::collection::vec(-5.0f64..5.0, 3), 0usize..3), 6..30)
                .prop_filter("two classes", |rows| rows.iter().map(|r| r.1).collect::<BTreeSet<_>>().len() >= 2)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn monotone_feature_transform_keeps_tree_shape(rows in small_dataset(), feature in 0usize..3, seed in 0u64..1000) {
                let labels = ["A", "B", "C"];
                let data: Vec<FeatureVector> = rows.iter().map(|(v, c)| labeled(v.clone(), labels[*c])).collect();
                let warped: Vec<FeatureVector> = data.iter().map(|fv| {
                    let mut fv = fv.clone();
                    fv.values[feature] = fv.values[feature].powi(3) + 2.0 * fv.values[feature].exp();
                    fv
                }).collect();
                let params = ForestParams { n_trees: 15, seed, ..Default::default() };
                let a_refs: Vec<&FeatureVector> = data.iter().collect();
                let b_refs: Vec<&FeatureVector> = warped.iter().collect();
                let a = train(&a_refs, &all_features(3), &params).unwrap();
                let b = train(&b_refs, &all_features(3), &params).unwrap();
                // Split choice depends only on the order of values, so both
                // forests have the same shape; thresholds differ.
                for (ta, tb) in a.trees.iter().zip(&b.trees) {
                    prop_assert_eq!(ta.nodes.len(), tb.nodes.len());
                    for (na, nb) in ta.nodes.iter().zip(&tb.nodes) {
                        match (na, nb) {
                            (Node::Split { feature: fa, left: la, .. }, Node::Split { feature: fb, left: lb, .. }) => {
                                prop_assert_eq!((fa, la), (fb, lb));
                            }
                            (Node::Leaf { counts: ca }, Node::Leaf { counts: cb }) => prop_assert_eq!(ca, cb),
                            _ => prop_assert!(false, "node kinds differ"),
                        }
                    }
                }
            }
        }
    }
}
