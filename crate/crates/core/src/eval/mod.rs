//! Leave-one-subject-out evaluation of the activity classifier.

pub mod dataset;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{chi2_scores, select_top_k, FeatureSelection, FeatureVector};
use crate::forest::{train, Classifier, ForestParams};

pub use report::{render_report, ReportFormat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub support: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub subject: String,
    pub test_count: usize,
    /// Features chosen on the training subjects of this fold.
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    /// Unweighted mean over classes.
    pub averages: Averages,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub fold_count: usize,
    pub folds: Vec<FoldSummary>,
}

fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl EvalReport {
    /// Derives per-class and macro-averaged metrics from a pooled confusion
    /// matrix. A class never predicted has precision 0.
    pub fn from_confusion(classes: Vec<String>, confusion: Vec<Vec<u64>>) -> Result<Self> {
        let n = classes.len();
        if n == 0 || confusion.len() != n || confusion.iter().any(|r| r.len() != n) {
            return Err(Error::argument("confusion matrix must be square over the class list"));
        }
        let per_class: Vec<ClassMetrics> = (0..n)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let support: u64 = confusion[c].iter().sum();
                let predicted: u64 = confusion.iter().map(|r| r[c]).sum();
                let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
                let recall = if support == 0 { 0.0 } else { tp / support as f64 };
                ClassMetrics { class: classes[c].clone(), precision, recall, f_score: f_score(precision, recall), support }
            })
            .collect();
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
        let averages = Averages {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f_score: mean(|m| m.f_score),
        };
        Ok(EvalReport { classes, per_class, averages, confusion, fold_count: 0, folds: Vec::new() })
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn class_metrics(&self, class: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.class == class)
    }
}

/// Trains a classifier for one fold from its training vectors and the
/// features selected on them.
pub type FitFn<'a> = dyn Fn(&[&FeatureVector], &FeatureSelection) -> Result<Box<dyn Classifier>> + Sync + 'a;

/// LOSO with chi-squared top-`k` selection and a random forest per fold.
pub fn loso_evaluate(dataset: &[FeatureVector], k: usize, params: &ForestParams) -> Result<EvalReport> {
    let fit = |train_set: &[&FeatureVector], selection: &FeatureSelection| -> Result<Box<dyn Classifier>> {
        Ok(Box::new(train(train_set, selection, params)?))
    };
    loso_evaluate_with(dataset, k, &fit)
}

/// LOSO with a caller-supplied classifier. Every subject is held out once;
/// feature selection and fitting see only the other subjects, and the
/// metrics come from the confusion matrix pooled over all folds.
pub fn loso_evaluate_with(dataset: &[FeatureVector], k: usize, fit: &FitFn<'_>) -> Result<EvalReport> {
    let mut by_subject: BTreeMap<&str, Vec<&FeatureVector>> = BTreeMap::new();
    for v in dataset {
        if v.label.is_none() {
            return Err(Error::argument("evaluation vectors must be labeled"));
        }
        by_subject.entry(v.subject.as_str()).or_default().push(v);
    }
    if by_subject.len() < 2 {
        return Err(Error::argument("leave-one-subject-out needs at least two subjects"));
    }
    let mut subjects: Vec<&str> = by_subject.keys().copied().collect();
    subjects.sort_by(|a, b| crate::natural_cmp(a, b));

    let mut classes: Vec<String> = dataset.iter().filter_map(|v| v.label.clone()).collect();
    classes.sort_by(|a, b| crate::natural_cmp(a, b));
    classes.dedup();
    let class_index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
    let mut folds = Vec::with_capacity(subjects.len());
    for subject in &subjects {
        let training: Vec<&FeatureVector> = subjects
            .iter()
            .filter(|s| *s != subject)
            .flat_map(|s| by_subject[s].iter().copied())
            .collect();
        let scores = chi2_scores(&training)?;
        let selection = select_top_k(&scores, k)?;
        let model = fit(&training, &selection)?;
        let test = &by_subject[subject];
        for v in test {
            let predicted = model.predict(v)?.predicted_class;
            let truth = class_index[v.label.as_deref().unwrap()];
            let guess = *class_index
                .get(predicted.as_str())
                .ok_or_else(|| Error::argument(format!("classifier predicted unknown class `{predicted}`")))?;
            confusion[truth][guess] += 1;
        }
        folds.push(FoldSummary { subject: subject.to_string(), test_count: test.len(), selected: selection.selected });
    }
    let mut report = EvalReport::from_confusion(classes, confusion)?;
    report.fold_count = folds.len();
    report.folds = folds;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WindowRef;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(subject: &str, label: &str, values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            values,
            subject: subject.into(),
            label: Some(label.into()),
            window: WindowRef { player_id: subject.into(), period_id: 1, start_t: 0.0, duration_s: 5.0 },
        }
    }

    /// Looks up the true label, which a real classifier never sees.
    struct Oracle(Vec<String>);

    impl Classifier for Oracle {
        fn classes(&self) -> &[String] {
            &self.0
        }
        fn vote_fractions(&self, values: &[f64]) -> Result<Vec<f64>> {
            let mut v = vec![0.0; self.0.len()];
            v[values[0] as usize] = 1.0;
            Ok(v)
        }
    }

    fn leaky_dataset() -> Vec<FeatureVector> {
        let mut data = Vec::new();
        for s in ["s1", "s2", "s3"] {
            for c in 0..3 {
                for _ in 0..4 {
                    data.push(fv(s, ["A", "B", "C"][c], vec![c as f64, 1.0]));
                }
            }
        }
        data
    }

    #[test]
    fn hand_confusion_metrics() {
        let r = EvalReport::from_confusion(vec!["a".into(), "b".into()], vec![vec![8, 2], vec![1, 9]]).unwrap();
        assert!((r.per_class[0].precision - 8.0 / 9.0).abs() < 1e-15);
        assert!((r.per_class[1].precision - 9.0 / 11.0).abs() < 1e-15);
        assert!((r.per_class[0].recall - 0.8).abs() < 1e-15);
        assert!((r.per_class[1].recall - 0.9).abs() < 1e-15);
        let f0 = 2.0 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8);
        assert!((r.per_class[0].f_score - f0).abs() < 1e-15);
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let r = EvalReport::from_confusion(vec!["a".into(), "b".into()], vec![vec![5, 0], vec![5, 0]]).unwrap();
        assert_eq!(r.per_class[1].precision, 0.0);
        assert_eq!(r.per_class[1].f_score, 0.0);
    }

    #[test]
    fn oracle_predictor_is_perfect() {
        let data = leaky_dataset();
        let fit = |_: &[&FeatureVector], _: &FeatureSelection| -> Result<Box<dyn Classifier>> {
            Ok(Box::new(Oracle(vec!["A".into(), "B".into(), "C".into()])))
        };
        let r = loso_evaluate_with(&data, 1, &fit).unwrap();
        assert_eq!(r.fold_count, 3);
        assert_eq!(r.confusion, vec![vec![12, 0, 0], vec![0, 12, 0], vec![0, 0, 12]]);
        assert_eq!(r.averages, Averages { precision: 1.0, recall: 1.0, f_score: 1.0 });
    }

    #[test]
    fn one_subject_is_rejected() {
        let data: Vec<FeatureVector> = leaky_dataset().into_iter().filter(|v| v.subject == "s1").collect();
        assert!(matches!(loso_evaluate(&data, 1, &ForestParams::default()), Err(Error::Argument(_))));
    }

    #[test]
    fn forest_loso_counts_every_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut data = Vec::new();
        for s in 0..4 {
            for c in 0..3 {
                for _ in 0..10 {
                    let v = (0..6).map(|j| rng.random_range(0.0..1.0) + if j == c { 2.0 } else { 0.0 }).collect();
                    data.push(fv(&format!("s{s}"), &format!("A{}", c + 1), v));
                }
            }
        }
        let params = ForestParams { n_trees: 20, seed: 1, ..Default::default() };
        let r = loso_evaluate(&data, 3, &params).unwrap();
        assert_eq!(r.total(), data.len() as u64);
        for row in &r.confusion {
            assert_eq!(row.iter().sum::<u64>(), 40);
        }
        assert!(r.averages.f_score > 0.9);
        let fs: Vec<f64> = r.per_class.iter().map(|m| m.f_score).collect();
        let (lo, hi) = fs.iter().fold((1.0f64, 0.0f64), |(a, b), &f| (a.min(f), b.max(f)));
        assert!(lo <= r.averages.f_score && r.averages.f_score <= hi);
    }

    #[test]
    fn selection_never_sees_the_test_subject() {
        // Feature 0 is noise everywhere except for subject s5, where it
        // equals the class index. It must not be picked when s5 is held out.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut data = Vec::new();
        for s in 0..6 {
            for c in 0..2 {
                for _ in 0..15 {
                    let poison = if s == 5 { c as f64 * 100.0 } else { rng.random_range(0.0..1.0) };
                    let signal = c as f64 + rng.random_range(0.0..1.5);
                    let noise: f64 = rng.random_range(0.0..1.0);
                    data.push(fv(&format!("s{s}"), ["A", "B"][c], vec![poison, signal, noise]));
                }
            }
        }
        let fit = |t: &[&FeatureVector], sel: &FeatureSelection| -> Result<Box<dyn Classifier>> {
            Ok(Box::new(train(t, sel, &ForestParams { n_trees: 5, ..Default::default() })?))
        };
        let r = loso_evaluate_with(&data, 1, &fit).unwrap();
        let held_out = r.folds.iter().find(|f| f.subject == "s5").unwrap();
        assert_eq!(held_out.selected, vec![1]);
    }
}
