use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, NUM_CLASSES};

use super::{FeatureVector, MlError, Prediction, Samples, NUM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// `value <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [u32; NUM_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub params: TreeParams,
    /// Arena; the root is node 0.
    pub nodes: Vec<Node>,
}

impl DecisionTreeModel {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_counts(&self, v: &FeatureVector) -> &[u32; NUM_CLASSES] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if v.0[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// How candidate features are chosen at each split.
pub(crate) enum FeatureSampler<'a> {
    All,
    /// Examine features in random order until `per_split` non-constant
    /// ones have been scored (more if none of them splits).
    Random {
        rng: &'a mut ChaCha8Rng,
        per_split: usize,
    },
}

impl FeatureSampler<'_> {
    fn order(&mut self) -> ([usize; NUM_FEATURES], usize) {
        let mut order: [usize; NUM_FEATURES] = std::array::from_fn(|i| i);
        match self {
            FeatureSampler::All => (order, NUM_FEATURES),
            FeatureSampler::Random { per_split, .. } if *per_split >= NUM_FEATURES => {
                (order, NUM_FEATURES)
            }
            FeatureSampler::Random { rng, per_split } => {
                order.shuffle(*rng);
                (order, *per_split)
            }
        }
    }
}

pub fn dt_train(train: &Samples, params: TreeParams) -> Result<DecisionTreeModel, MlError> {
    if train.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    let indices: Vec<usize> = (0..train.len()).collect();
    Ok(grow(train, indices, params, &mut FeatureSampler::All))
}

pub fn dt_predict(model: &DecisionTreeModel, v: &FeatureVector) -> Prediction {
    Prediction::from_scores(normalize_counts(model.leaf_counts(v)))
}

pub(crate) fn normalize_counts(counts: &[u32; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let total: u32 = counts.iter().sum();
    counts.map(|c| f64::from(c) / f64::from(total))
}

/// Best split found so far. `score` is the rational Σ_children Σ_k n_k²/n_child
/// stored as (numerator, denominator); maximizing it minimizes weighted Gini.
struct Candidate {
    num: u128,
    den: u128,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Higher score wins; on equal scores the lower feature index, then the
    /// lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        match (self.num * other.den).cmp(&(other.num * self.den)) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                (self.feature, self.threshold) < (other.feature, other.threshold)
            }
        }
    }
}

pub(crate) fn grow(
    data: &Samples,
    root: Vec<usize>,
    params: TreeParams,
    sampler: &mut FeatureSampler<'_>,
) -> DecisionTreeModel {
    let mut nodes = vec![Node::Leaf {
        counts: [0; NUM_CLASSES],
    }];
    let mut stack = vec![(0usize, root, 0usize)];
    let mut column: Vec<(f64, u8)> = Vec::new();
    while let Some((slot, idx, depth)) = stack.pop() {
        let counts = class_counts(&data.labels, &idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = params.max_depth.is_some_and(|d| depth >= d);
        let best = if pure || depth_reached || idx.len() < params.min_samples_split.max(2) {
            None
        } else {
            best_split(data, &idx, &counts, sampler, &mut column)
        };
        let Some(best) = best else {
            nodes[slot] = Node::Leaf { counts };
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| data.features[i].0[best.feature] <= best.threshold);
        let left = nodes.len();
        let right = left + 1;
        let leaf = Node::Leaf {
            counts: [0; NUM_CLASSES],
        };
        nodes.push(leaf.clone());
        nodes.push(leaf);
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        stack.push((right, right_idx, depth + 1));
        stack.push((left, left_idx, depth + 1));
    }
    DecisionTreeModel { params, nodes }
}

fn class_counts(labels: &[ClassLabel], idx: &[usize]) -> [u32; NUM_CLASSES] {
    let mut counts = [0u32; NUM_CLASSES];
    for &i in idx {
        counts[labels[i].index()] += 1;
    }
    counts
}

fn best_split(
    data: &Samples,
    idx: &[usize],
    parent: &[u32; NUM_CLASSES],
    sampler: &mut FeatureSampler<'_>,
    column: &mut Vec<(f64, u8)>,
) -> Option<Candidate> {
    let n = idx.len() as u128;
    let (order, wanted) = sampler.order();
    let mut best: Option<Candidate> = None;
    let mut scored = 0;
    for &feature in &order {
        if scored >= wanted && best.is_some() {
            break;
        }
        column.clear();
        column.extend(
            idx.iter()
                .map(|&i| (data.features[i].0[feature], data.labels[i].class_no())),
        );
        column.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if column[0].0 == column[column.len() - 1].0 {
            continue;
        }
        scored += 1;

        let mut left = [0u128; NUM_CLASSES];
        let mut right: [u128; NUM_CLASSES] = parent.map(u128::from);
        let mut sq_left: u128 = 0;
        let mut sq_right: u128 = right.iter().map(|c| c * c).sum();
        for i in 0..column.len() - 1 {
            let c = column[i].1 as usize;
            sq_left += 2 * left[c] + 1;
            left[c] += 1;
            sq_right -= 2 * right[c] - 1;
            right[c] -= 1;
            let (lo, hi) = (column[i].0, column[i + 1].0);
            if lo >= hi {
                continue;
            }
            let n_left = (i + 1) as u128;
            let n_right = n - n_left;
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi || threshold < lo {
                threshold = lo;
            }
            let cand = Candidate {
                num: sq_left * n_right + sq_right * n_left,
                den: n_left * n_right,
                feature,
                threshold,
            };
            if best.as_ref().is_none_or(|b| cand.beats(b)) {
                best = Some(cand);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassLabel::{Appliances as B, Energy as A, Hubs as C};
    use proptest::prelude::*;

    fn one_d(points: &[(f64, ClassLabel)]) -> Samples {
        Samples::new(
            points
                .iter()
                .map(|(x, _)| {
                    let mut v = [0.0; NUM_FEATURES];
                    v[0] = *x;
                    FeatureVector(v)
                })
                .collect(),
            points.iter().map(|(_, l)| *l).collect(),
        )
    }

    fn gini(counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        1.0 - counts
            .iter()
            .map(|&c| (c as f64 / n as f64).powi(2))
            .sum::<f64>()
    }

    /// Weighted child Gini of every candidate threshold on feature 0, by
    /// direct enumeration.
    fn exhaustive_splits(points: &[(f64, ClassLabel)]) -> Vec<(f64, f64)> {
        let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs.windows(2)
            .map(|w| {
                let t = (w[0] + w[1]) / 2.0;
                let mut l = [0usize; 6];
                let mut r = [0usize; 6];
                for (x, c) in points {
                    if *x <= t {
                        l[c.index()] += 1
                    } else {
                        r[c.index()] += 1
                    }
                }
                let (nl, nr) = (l.iter().sum::<usize>() as f64, r.iter().sum::<usize>() as f64);
                (t, (nl * gini(&l) + nr * gini(&r)) / (nl + nr))
            })
            .collect()
    }

    #[test]
    fn one_split_separates_two_clusters() {
        let pts = [(0.0, A), (1.0, A), (10.0, B), (11.0, B)];
        let oracle = exhaustive_splits(&pts);
        let (best_t, best_g) = oracle
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert_eq!(best_g, 0.0);
        assert_eq!(best_t, 5.5);

        let model = dt_train(&one_d(&pts), TreeParams::default()).unwrap();
        assert_eq!(model.depth(), 1);
        let Node::Split {
            feature, threshold, ..
        } = model.nodes[0]
        else {
            panic!("root must split")
        };
        assert_eq!(feature, 0);
        assert!(threshold > 1.0 && threshold < 10.0);
        assert_eq!(threshold, best_t);
        for (x, l) in pts {
            let mut v = [0.0; 10];
            v[0] = x;
            assert_eq!(dt_predict(&model, &FeatureVector(v)).label, l);
        }
    }

    #[test]
    fn root_split_matches_oracle_on_mixed_data() {
        let pts = [
            (0.0, A),
            (1.0, B),
            (2.0, A),
            (3.0, B),
            (4.0, B),
            (5.0, C),
            (6.0, C),
            (7.0, A),
        ];
        let oracle = exhaustive_splits(&pts);
        let best = oracle
            .iter()
            .fold(None::<(f64, f64)>, |acc, &(t, g)| match acc {
                Some((_, bg)) if bg <= g + 1e-12 => acc,
                _ => Some((t, g)),
            })
            .unwrap();
        let model = dt_train(&one_d(&pts), TreeParams::default()).unwrap();
        let Node::Split { threshold, .. } = model.nodes[0] else {
            panic!()
        };
        assert_eq!(threshold, best.0);
    }

    #[test]
    fn depth_zero_is_majority_leaf() {
        let pts = [(0.0, A), (1.0, B), (10.0, B), (11.0, B)];
        let model = dt_train(
            &one_d(&pts),
            TreeParams {
                max_depth: Some(0),
                min_samples_split: 2,
            },
        )
        .unwrap();
        assert_eq!(model.nodes.len(), 1);
        let p = dt_predict(&model, &FeatureVector([0.0; 10]));
        assert_eq!(p.label, B);
        assert_eq!(p.scores[A.index()], 0.25);
        assert_eq!(p.scores[B.index()], 0.75);
    }

    #[test]
    fn pure_root_is_single_leaf() {
        let pts = [(0.0, C), (5.0, C), (9.0, C)];
        let model = dt_train(&one_d(&pts), TreeParams::default()).unwrap();
        assert_eq!(model.nodes.len(), 1);
        let p = dt_predict(&model, &FeatureVector([3.0; 10]));
        assert_eq!((p.label, p.scores[C.index()]), (C, 1.0));
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // features 2 and 5 separate equally well
        let mk = |a: f64, b: f64| {
            let mut v = [0.0; 10];
            v[2] = a;
            v[5] = b;
            FeatureVector(v)
        };
        let s = Samples::new(
            vec![mk(0.0, 0.0), mk(1.0, 1.0), mk(0.0, 0.0), mk(1.0, 1.0)],
            vec![A, B, A, B],
        );
        let m = dt_train(&s, TreeParams::default()).unwrap();
        assert!(matches!(m.nodes[0], Node::Split { feature: 2, .. }));
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let pts = [(0.0, A), (1.0, B), (2.0, A)];
        let m = dt_train(
            &one_d(&pts),
            TreeParams {
                max_depth: None,
                min_samples_split: 4,
            },
        )
        .unwrap();
        assert_eq!(m.nodes.len(), 1);
    }

    #[test]
    fn empty_training_rejected() {
        assert_eq!(
            dt_train(&Samples::default(), TreeParams::default()),
            Err(MlError::EmptyTraining)
        );
    }

    proptest! {
        #[test]
        fn unlimited_depth_fits_consistent_data(
            raw in proptest::collection::btree_map(
                (0u8..6, 0u8..6, 0u8..4), 0u8..6, 2..60)
        ) {
            let features: Vec<FeatureVector> = raw.keys().map(|&(a, b, c)| {
                let mut v = [0.0; 10];
                v[1] = a as f64;
                v[4] = b as f64;
                v[8] = c as f64;
                FeatureVector(v)
            }).collect();
            let labels: Vec<ClassLabel> = raw.values().map(|&l| ClassLabel::ALL[l as usize]).collect();
            let s = Samples::new(features, labels);
            let m = dt_train(&s, TreeParams::default()).unwrap();
            for (v, l) in s.features.iter().zip(&s.labels) {
                let p = dt_predict(&m, v);
                prop_assert_eq!(p.label, *l);
                prop_assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn leaf_histograms_account_for_every_sample(
            xs in proptest::collection::vec((0.0f64..100.0, 0u8..6), 1..80),
            depth in 0usize..4,
        ) {
            let pts: Vec<_> = xs.iter().map(|&(x, l)| (x, ClassLabel::ALL[l as usize])).collect();
            let m = dt_train(&one_d(&pts), TreeParams { max_depth: Some(depth), min_samples_split: 2 }).unwrap();
            let total: u32 = m.nodes.iter().map(|n| match n {
                Node::Leaf { counts } => counts.iter().sum(),
                Node::Split { .. } => 0,
            }).sum();
            prop_assert_eq!(total as usize, pts.len());
            prop_assert!(m.depth() <= depth);
        }
    }
}
