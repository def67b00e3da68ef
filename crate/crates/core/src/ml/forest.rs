use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::NUM_CLASSES;

use super::tree::{grow, normalize_counts, FeatureSampler};
use super::{DecisionTreeModel, FeatureVector, MlError, Prediction, Samples, TreeParams, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 50,
            tree: TreeParams::default(),
            features_per_split: 3,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
    pub trees: Vec<DecisionTreeModel>,
}

/// Trains `n_trees` trees in parallel. Every tree draws from its own stream
/// seeded from the master seed, so the result does not depend on thread
/// scheduling.
pub fn rf_train(train: &Samples, params: &ForestParams) -> Result<RandomForestModel, MlError> {
    if train.is_empty() {
        return Err(MlError::EmptyTraining);
    }
    if params.n_trees == 0 {
        return Err(MlError::InvalidParameter("n_trees must be at least 1".into()));
    }
    if params.features_per_split == 0 {
        return Err(MlError::InvalidParameter(
            "features_per_split must be at least 1".into(),
        ));
    }
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
    let n = train.len();
    let per_split = params.features_per_split.min(NUM_FEATURES);
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut sampler = FeatureSampler::Random {
                rng: &mut rng,
                per_split,
            };
            grow(train, idx, params.tree, &mut sampler)
        })
        .collect();
    Ok(RandomForestModel {
        features_per_split: per_split,
        bootstrap: params.bootstrap,
        seed: params.seed,
        trees,
    })
}

/// Mean of the per-tree leaf class frequencies.
pub fn rf_predict(model: &RandomForestModel, v: &FeatureVector) -> Prediction {
    let mut acc = [0.0; NUM_CLASSES];
    for t in &model.trees {
        let p = normalize_counts(t.leaf_counts(v));
        for c in 0..NUM_CLASSES {
            acc[c] += p[c];
        }
    }
    let n = model.trees.len() as f64;
    Prediction::from_scores(acc.map(|s| s / n))
}
