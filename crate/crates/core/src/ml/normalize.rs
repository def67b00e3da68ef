use serde::{Deserialize, Serialize};

use super::{FeatureVector, NUM_FEATURES};

/// Per-feature min-max scaling fitted on training data. Constant features
/// map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: [f64; NUM_FEATURES],
    pub max: [f64; NUM_FEATURES],
}

impl Normalizer {
    pub fn fit(data: &[FeatureVector]) -> Self {
        let mut min = [f64::INFINITY; NUM_FEATURES];
        let mut max = [f64::NEG_INFINITY; NUM_FEATURES];
        for v in data {
            for j in 0..NUM_FEATURES {
                min[j] = min[j].min(v.0[j]);
                max[j] = max[j].max(v.0[j]);
            }
        }
        if data.is_empty() {
            min = [0.0; NUM_FEATURES];
            max = [0.0; NUM_FEATURES];
        }
        Normalizer { min, max }
    }

    pub fn transform(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; NUM_FEATURES];
        for j in 0..NUM_FEATURES {
            let range = self.max[j] - self.min[j];
            out[j] = if range > 0.0 {
                (v.0[j] - self.min[j]) / range
            } else {
                0.0
            };
        }
        FeatureVector(out)
    }
}
