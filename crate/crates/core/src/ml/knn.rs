use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, NUM_CLASSES};

use super::{FeatureVector, MlError, Normalizer, Prediction, Samples, NUM_FEATURES};

const LEAF_SIZE: usize = 16;

/// K-nearest-neighbour classifier over min-max normalized features, backed
/// by a kd-tree. Distance ties go to the lower training row, vote ties to
/// the lower class number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "KnnRepr", into = "KnnRepr")]
pub struct KnnModel {
    k: usize,
    normalizer: Normalizer,
    points: Vec<[f64; NUM_FEATURES]>,
    labels: Vec<ClassLabel>,
    index: KdTree,
}

#[derive(Serialize, Deserialize)]
struct KnnRepr {
    k: usize,
    normalizer: Normalizer,
    points: Vec<[f64; NUM_FEATURES]>,
    labels: Vec<ClassLabel>,
}

impl From<KnnRepr> for KnnModel {
    fn from(r: KnnRepr) -> Self {
        let index = KdTree::build(&r.points);
        KnnModel {
            k: r.k,
            normalizer: r.normalizer,
            points: r.points,
            labels: r.labels,
            index,
        }
    }
}

impl From<KnnModel> for KnnRepr {
    fn from(m: KnnModel) -> Self {
        KnnRepr {
            k: m.k,
            normalizer: m.normalizer,
            points: m.points,
            labels: m.labels,
        }
    }
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest training rows as (squared distance, row), nearest first.
    pub fn neighbors(&self, v: &FeatureVector) -> Vec<(f64, usize)> {
        let q = self.normalizer.transform(v).0;
        let mut heap = BinaryHeap::with_capacity(self.k + 1);
        self.index.search(&self.points, &q, self.k, 0, &mut heap);
        let mut out: Vec<Neighbor> = heap.into_vec();
        out.sort();
        out.into_iter().map(|n| (n.dist, n.row)).collect()
    }
}

pub fn knn_train(train: &Samples, k: usize) -> Result<KnnModel, MlError> {
    if train.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    if k == 0 || k > train.len() {
        return Err(MlError::InvalidParameter(format!(
            "k = {k} with {} training rows",
            train.len()
        )));
    }
    let normalizer = Normalizer::fit(&train.features);
    let points: Vec<[f64; NUM_FEATURES]> = train
        .features
        .iter()
        .map(|v| normalizer.transform(v).0)
        .collect();
    Ok(KnnRepr {
        k,
        normalizer,
        points,
        labels: train.labels.clone(),
    }
    .into())
}

pub fn knn_predict(model: &KnnModel, v: &FeatureVector) -> Prediction {
    let mut votes = [0u32; NUM_CLASSES];
    for (_, row) in model.neighbors(v) {
        votes[model.labels[row].index()] += 1;
    }
    let k = model.k as f64;
    Prediction::from_scores(votes.map(|c| f64::from(c) / k))
}

pub(crate) fn squared_distance(a: &[f64; NUM_FEATURES], b: &[f64; NUM_FEATURES]) -> f64 {
    let mut d = 0.0;
    for j in 0..NUM_FEATURES {
        let diff = a[j] - b[j];
        d += diff * diff;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Neighbor {
    dist: f64,
    row: usize,
}

impl Eq for Neighbor {}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.row.cmp(&other.row))
    }
}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    /// Rows on the left have `coord <= value`, rows on the right `>= value`.
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct KdTree {
    nodes: Vec<KdNode>,
    rows: Vec<usize>,
}

impl KdTree {
    fn build(points: &[[f64; NUM_FEATURES]]) -> Self {
        let mut tree = KdTree {
            nodes: Vec::new(),
            rows: (0..points.len()).collect(),
        };
        if !points.is_empty() {
            tree.build_range(points, 0, points.len());
        }
        tree
    }

    fn build_range(&mut self, points: &[[f64; NUM_FEATURES]], start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let rows = &mut self.rows[start..end];
        let mut dim = 0;
        let mut widest = 0.0;
        for j in 0..NUM_FEATURES {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(points[r][j]), hi.max(points[r][j]))
            });
            if hi - lo > widest {
                widest = hi - lo;
                dim = j;
            }
        }
        if widest == 0.0 {
            return id;
        }
        let mid = rows.len() / 2;
        rows.select_nth_unstable_by(mid, |&a, &b| points[a][dim].total_cmp(&points[b][dim]));
        let value = points[rows[mid]][dim];
        let left = self.build_range(points, start, start + mid);
        let right = self.build_range(points, start + mid, end);
        self.nodes[id] = KdNode::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn search(
        &self,
        points: &[[f64; NUM_FEATURES]],
        q: &[f64; NUM_FEATURES],
        k: usize,
        node: usize,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &row in &self.rows[start..end] {
                    let cand = Neighbor {
                        dist: squared_distance(q, &points[row]),
                        row,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if heap.peek().is_some_and(|worst| cand < *worst) {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(points, q, k, near, heap);
                // equal bounds are still visited: a tied row there may have a lower index
                let must_visit = heap.len() < k || heap.peek().is_some_and(|w| diff * diff <= w.dist);
                if must_visit {
                    self.search(points, q, k, far, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClassLabel::{Appliances as B, Energy as A};

    fn samples(points: &[(f64, f64, ClassLabel)]) -> Samples {
        Samples::new(
            points
                .iter()
                .map(|&(x, y, _)| {
                    let mut v = [0.0; 10];
                    v[0] = x;
                    v[1] = y;
                    FeatureVector(v)
                })
                .collect(),
            points.iter().map(|p| p.2).collect(),
        )
    }

    fn q(x: f64, y: f64) -> FeatureVector {
        let mut v = [0.0; 10];
        v[0] = x;
        v[1] = y;
        FeatureVector(v)
    }

    #[test]
    fn k1_exact_match() {
        let s = samples(&[(0.0, 0.0, A), (10.0, 10.0, B), (5.0, 0.0, A)]);
        let m = knn_train(&s, 1).unwrap();
        assert_eq!(knn_predict(&m, &q(10.0, 10.0)).label, B);
        assert_eq!(knn_predict(&m, &q(10.0, 10.0)).scores[B.index()], 1.0);
    }

    #[test]
    fn plurality_with_fraction() {
        let s = samples(&[(0.0, 0.0, A), (1.0, 0.0, A), (2.0, 0.0, B), (9.0, 9.0, B)]);
        let m = knn_train(&s, 3).unwrap();
        let p = knn_predict(&m, &q(1.0, 0.0));
        assert_eq!(p.label, A);
        assert!((p.scores[A.index()] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn vote_tie_goes_to_lower_class() {
        let s = samples(&[(0.0, 0.0, B), (2.0, 0.0, A), (10.0, 10.0, B)]);
        let m = knn_train(&s, 2).unwrap();
        let p = knn_predict(&m, &q(1.0, 0.0));
        assert_eq!(p.label, A);
        assert_eq!(p.scores[A.index()], 0.5);
    }

    #[test]
    fn distance_tie_goes_to_lower_row() {
        let s = samples(&[(2.0, 0.0, B), (0.0, 0.0, A), (1.0, 5.0, A)]);
        let m = knn_train(&s, 1).unwrap();
        // rows 0 and 1 are equidistant from x = 1
        assert_eq!(m.neighbors(&q(1.0, 0.0))[0].1, 0);
    }

    #[test]
    fn k_bounds() {
        let s = samples(&[(0.0, 0.0, A), (1.0, 1.0, B)]);
        assert!(knn_train(&s, 0).is_err());
        assert!(knn_train(&s, 3).is_err());
        assert!(knn_train(&Samples::default(), 1).is_err());
    }

    #[test]
    fn duplicate_heavy_data_builds() {
        let pts: Vec<_> = (0..200).map(|i| (1.0, 1.0, if i % 2 == 0 { A } else { B })).collect();
        let m = knn_train(&samples(&pts), 5).unwrap();
        let n = m.neighbors(&q(1.0, 1.0));
        assert_eq!(n.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn serde_rebuilds_index() {
        let pts: Vec<_> = (0..100).map(|i| (i as f64, (i * 7 % 13) as f64, ClassLabel::ALL[i % 6])).collect();
        let m = knn_train(&samples(&pts), 3).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: KnnModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
