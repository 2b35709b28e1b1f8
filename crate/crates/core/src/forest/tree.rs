use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Decisions closer than this are treated as ties.
const GAIN_EPSILON: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    /// Class counts of the bootstrap samples reaching the leaf.
    Leaf { counts: Vec<u32> },
}

/// Binary decision tree stored as a flat node list; node 0 is the root and
/// children always follow their parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[u32] {
        let mut index = 0usize;
        loop {
            match &self.nodes[index] {
                Node::Split { feature, threshold, left, right } => {
                    index = if x[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the leaf reached by `x`, lowest index on ties.
    pub fn vote(&self, x: &[f64]) -> usize {
        majority(self.leaf_for(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

pub(crate) struct GrowSettings<'a> {
    pub features: &'a [usize],
    pub features_per_split: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub class_count: usize,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one CART tree over `samples` (row indices, repeats allowed).
pub(crate) fn grow(
    rows: &[&[f64]],
    labels: &[usize],
    samples: Vec<usize>,
    settings: &GrowSettings<'_>,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
    let mut stack = vec![(0usize, samples, 0usize)];
    let mut order: Vec<usize> = settings.features.to_vec();
    let mut scratch: Vec<(f64, usize)> = Vec::new();

    while let Some((slot, samples, depth)) = stack.pop() {
        let counts = class_counts(labels, &samples, settings.class_count);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = settings.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || samples.len() < settings.min_samples_split {
            nodes[slot] = Node::Leaf { counts };
            continue;
        }

        // Candidates come from a fresh permutation; further features are only
        // consulted when none of the first `features_per_split` can split.
        order.copy_from_slice(settings.features);
        order.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        for (tried, &feature) in order.iter().enumerate() {
            if tried >= settings.features_per_split && best.is_some() {
                break;
            }
            if let Some(candidate) = best_threshold(rows, labels, &samples, feature, &counts, &mut scratch) {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        candidate.gain > b.gain + GAIN_EPSILON
                            || ((candidate.gain - b.gain).abs() <= GAIN_EPSILON
                                && (candidate.feature, candidate.threshold) < (b.feature, b.threshold))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }

        let Some(split) = best else {
            nodes[slot] = Node::Leaf { counts };
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|&&i| rows[i][split.feature] <= split.threshold);
        let left_slot = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[slot] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left_slot as u32,
            right: left_slot as u32 + 1,
        };
        stack.push((left_slot + 1, right, depth + 1));
        stack.push((left_slot, left, depth + 1));
    }
    Tree { nodes }
}

fn class_counts(labels: &[usize], samples: &[usize], class_count: usize) -> Vec<u32> {
    let mut counts = vec![0u32; class_count];
    for &i in samples {
        counts[labels[i]] += 1;
    }
    counts
}

/// Best Gini split of one feature, or `None` when the feature is constant
/// over the node.
fn best_threshold(
    rows: &[&[f64]],
    labels: &[usize],
    samples: &[usize],
    feature: usize,
    parent: &[u32],
    scratch: &mut Vec<(f64, usize)>,
) -> Option<BestSplit> {
    scratch.clear();
    scratch.extend(samples.iter().map(|&i| (rows[i][feature], labels[i])));
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    if scratch[0].0 == scratch[scratch.len() - 1].0 {
        return None;
    }

    let n = samples.len() as f64;
    let mut right: Vec<f64> = parent.iter().map(|&c| c as f64).collect();
    let mut left = vec![0.0; right.len()];
    let mut sq_right: f64 = right.iter().map(|c| c * c).sum();
    let mut sq_left = 0.0;
    let parent_impurity = 1.0 - sq_right / (n * n);

    let mut best: Option<BestSplit> = None;
    for i in 0..scratch.len() - 1 {
        let class = scratch[i].1;
        sq_left += 2.0 * left[class] + 1.0;
        sq_right -= 2.0 * right[class] - 1.0;
        left[class] += 1.0;
        right[class] -= 1.0;
        let (a, b) = (scratch[i].0, scratch[i + 1].0);
        if a == b {
            continue;
        }
        let n_left = (i + 1) as f64;
        let n_right = n - n_left;
        // n · weighted child impurity = n_l − Σl²/n_l + n_r − Σr²/n_r
        let weighted = (n_left - sq_left / n_left + n_right - sq_right / n_right) / n;
        let gain = parent_impurity - weighted;
        if best.as_ref().is_none_or(|b| gain > b.gain + GAIN_EPSILON) {
            let mid = a + (b - a) / 2.0;
            let threshold = if mid < b { mid } else { a };
            best = Some(BestSplit { gain, feature, threshold });
        }
    }
    best
}
