//! Supervised flow classification: decision tree, k-nearest neighbours and
//! random forest over the ten telemetry features, plus the evaluation
//! metrics (accuracy, macro precision/F1, label MSE, one-vs-rest ROC).

mod forest;
mod knn;
mod metrics;
mod normalize;
mod roc;
mod split;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collector::Dataset;
use crate::model::{ClassLabel, NUM_CLASSES};
use crate::switch::TelemetryRecord;

pub use forest::{rf_predict, rf_train, ForestParams, RandomForestModel};
pub use knn::{knn_predict, knn_train, KnnModel};
pub use metrics::{evaluate, EvalReport};
pub use normalize::Normalizer;
pub use roc::{roc, roc_binary, RocCurve, RocPoint};
pub use split::split;
pub use tree::{dt_predict, dt_train, DecisionTreeModel, Node, TreeParams};

pub const NUM_FEATURES: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("class {0} has fewer than 2 samples")]
    ClassTooSmall(ClassLabel),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    BadFraction(f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {predictions} predictions vs {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("class {0} has no positive or no negative samples")]
    SingleClassOnly(ClassLabel),
    #[error("feature value is not finite")]
    NonFinite,
}

/// The ten telemetry features as reals, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn new(values: [f64; NUM_FEATURES]) -> Result<Self, MlError> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(FeatureVector(values))
        } else {
            Err(MlError::NonFinite)
        }
    }

    pub fn values(&self) -> &[f64; NUM_FEATURES] {
        &self.0
    }
}

/// Feature vector of a record. The label never enters the features.
pub fn featurize(record: &TelemetryRecord) -> FeatureVector {
    FeatureVector(record.feature_values().map(|v| v as f64))
}

/// Feature matrix with aligned labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Samples {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<ClassLabel>,
}

impl Samples {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<ClassLabel>) -> Self {
        assert_eq!(features.len(), labels.len(), "features and labels must align");
        Samples { features, labels }
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        Samples {
            features: ds.records().iter().map(featurize).collect(),
            labels: ds.labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Samples {
        Samples {
            features: indices.iter().map(|&i| self.features[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}

/// Predicted class with per-class probabilities summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: ClassLabel,
    pub scores: [f64; NUM_CLASSES],
}

impl Prediction {
    pub fn from_scores(scores: [f64; NUM_CLASSES]) -> Self {
        Prediction {
            label: argmax(&scores),
            scores,
        }
    }

    pub fn confidence(&self) -> f64 {
        self.scores[self.label.index()]
    }
}

/// Index of the largest score; ties go to the lower class number.
pub fn argmax(scores: &[f64; NUM_CLASSES]) -> ClassLabel {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    ClassLabel::ALL[best]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dt,
    Knn,
    Rf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Knn => "knn",
            ModelKind::Rf => "rf",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dt" | "tree" | "decision-tree" => Ok(ModelKind::Dt),
            "knn" => Ok(ModelKind::Knn),
            "rf" | "forest" | "random-forest" => Ok(ModelKind::Rf),
            other => Err(MlError::InvalidParameter(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Hyperparameters for any of the three model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub k: usize,
    pub n_trees: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            max_depth: None,
            min_samples_split: 2,
            k: 5,
            n_trees: 50,
            features_per_split: 3,
            bootstrap: true,
        }
    }
}

impl Hyperparams {
    pub fn tree(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    DecisionTree(DecisionTreeModel),
    Knn(KnnModel),
    RandomForest(RandomForestModel),
}

impl Classifier {
    pub fn train(
        kind: ModelKind,
        train: &Samples,
        params: &Hyperparams,
        seed: u64,
    ) -> Result<Classifier, MlError> {
        Ok(match kind {
            ModelKind::Dt => Classifier::DecisionTree(dt_train(train, params.tree())?),
            ModelKind::Knn => Classifier::Knn(knn_train(train, params.k)?),
            ModelKind::Rf => Classifier::RandomForest(rf_train(
                train,
                &ForestParams {
                    n_trees: params.n_trees,
                    tree: params.tree(),
                    features_per_split: params.features_per_split,
                    bootstrap: params.bootstrap,
                    seed,
                },
            )?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::DecisionTree(_) => ModelKind::Dt,
            Classifier::Knn(_) => ModelKind::Knn,
            Classifier::RandomForest(_) => ModelKind::Rf,
        }
    }

    pub fn predict(&self, v: &FeatureVector) -> Prediction {
        match self {
            Classifier::DecisionTree(m) => dt_predict(m, v),
            Classifier::Knn(m) => knn_predict(m, v),
            Classifier::RandomForest(m) => rf_predict(m, v),
        }
    }

    pub fn predict_all(&self, vs: &[FeatureVector]) -> Vec<Prediction> {
        use rayon::prelude::*;
        vs.par_iter().map(|v| self.predict(v)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TelemetryRecord {
        TelemetryRecord {
            ingress_port: 0,
            flow_interval_time: 0,
            enq_qdepth: 0,
            deq_qdepth: 0,
            deq_timedelta: 0,
            protocol: 0,
            src_port: 0,
            dst_port: 0,
            src_ip: 0,
            dst_ip: 0,
            timestamp_us: 99,
            size_bytes: 60,
            label: Some(ClassLabel::Hubs),
        }
    }

    #[test]
    fn featurize_positions() {
        assert_eq!(featurize(&record()), FeatureVector([0.0; 10]));
        assert_eq!(featurize(&record()), featurize(&record()));
        let r = TelemetryRecord {
            dst_port: 443,
            ..record()
        };
        assert_eq!(featurize(&r).0[7], 443.0);
    }

    #[test]
    fn non_finite_rejected() {
        let mut v = [0.0; 10];
        v[3] = f64::NAN;
        assert_eq!(FeatureVector::new(v), Err(MlError::NonFinite));
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax(&[0.0, 0.5, 0.5, 0.0, 0.0, 0.0]), ClassLabel::Appliances);
        assert_eq!(argmax(&[0.0; 6]), ClassLabel::Energy);
    }

    #[test]
    fn model_kind_names() {
        assert_eq!("DT".parse::<ModelKind>().unwrap(), ModelKind::Dt);
        assert_eq!("knn".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert_eq!("rf".parse::<ModelKind>().unwrap(), ModelKind::Rf);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
