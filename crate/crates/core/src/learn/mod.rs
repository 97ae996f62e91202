//! Base classifiers, the stacked logistic meta-learner, stratified
//! cross-validation and Cohen's kappa.

mod bayes;
mod cv;
mod ensemble;
mod forest;
mod kappa;
mod knn;
mod logistic;
mod persist;
mod scaler;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::BalanceError;
use crate::features::LabeledInstance;

pub use bayes::GaussianNb;
pub use cv::{cross_validate, stratified_folds, EvaluationReport, NoProbe, ReportRow, TrainingProbe, ENSEMBLE_NAME};
pub use ensemble::{train_stacked_ensemble, train_stacked_on, BaseRoster, ClassProbability, EnsembleModel, TrainingMetadata};
pub use forest::RandomForest;
pub use kappa::{cohens_kappa, ConfusionMatrix};
pub use knn::{KnnModel, NeighborStore};
pub use logistic::LogisticRegression;
pub use persist::{from_json, load_model, save_model, to_json, MODEL_FORMAT_VERSION};
pub use scaler::Scaler;
pub use tree::DecisionTree;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("training data is empty")]
    EmptyData,
    #[error("training data has a single class")]
    SingleClass,
    #[error("each class needs at least {folds} instances for {folds}-fold cross-validation (positive {positive}, negative {negative})")]
    TooFewInstances { folds: usize, positive: usize, negative: usize },
    #[error("expected {expected} features, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error("model file: {0}")]
    Persist(String),
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
}

/// The fixed ensemble roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Knn1,
    Knn2,
    Knn3,
    Knn4,
    Knn5,
    DecisionTree,
    RandomForest,
    GaussianNaiveBayes,
}

impl BaseKind {
    pub const ALL: [BaseKind; 8] = [
        BaseKind::Knn1,
        BaseKind::Knn2,
        BaseKind::Knn3,
        BaseKind::Knn4,
        BaseKind::Knn5,
        BaseKind::DecisionTree,
        BaseKind::RandomForest,
        BaseKind::GaussianNaiveBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseKind::Knn1 => "knn_1",
            BaseKind::Knn2 => "knn_2",
            BaseKind::Knn3 => "knn_3",
            BaseKind::Knn4 => "knn_4",
            BaseKind::Knn5 => "knn_5",
            BaseKind::DecisionTree => "decision_tree",
            BaseKind::RandomForest => "random_forest",
            BaseKind::GaussianNaiveBayes => "gaussian_naive_bayes",
        }
    }

    /// Neighbor count for the kNN kinds.
    pub fn knn_k(self) -> Option<usize> {
        match self {
            BaseKind::Knn1 => Some(1),
            BaseKind::Knn2 => Some(2),
            BaseKind::Knn3 => Some(3),
            BaseKind::Knn4 => Some(4),
            BaseKind::Knn5 => Some(5),
            _ => None,
        }
    }
}

impl fmt::Display for BaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 20, min_leaf: 2, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 20, min_leaf: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 500, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub nb_var_floor: f64,
    pub meta: LogisticParams,
    pub smote_k: usize,
    pub inner_folds: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            nb_var_floor: 1e-9,
            meta: LogisticParams::default(),
            smote_k: 5,
            inner_folds: 5,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidParameter(m.into()));
        if self.tree.max_depth == 0 || self.forest.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if self.tree.min_leaf == 0 || self.forest.min_leaf == 0 {
            return bad("min_leaf must be positive");
        }
        if self.forest.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if !(self.nb_var_floor > 0.0) {
            return bad("nb_var_floor must be positive");
        }
        if !(self.meta.learning_rate > 0.0) || self.meta.l2 < 0.0 {
            return bad("learning_rate must be positive and l2 non-negative");
        }
        if self.smote_k == 0 {
            return bad("smote_k must be positive");
        }
        if self.inner_folds < 2 {
            return bad("inner_folds must be at least 2");
        }
        Ok(())
    }
}

/// Dense row-major feature matrix with binary labels (`true` = positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, values: Vec::new(), labels: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], labels: &[bool]) -> Result<Self, LearnError> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(LearnError::EmptyData)?;
        let mut d = Self::new(dim);
        for (r, &l) in rows.iter().zip(labels) {
            d.push(r.as_ref(), l)?;
        }
        if rows.len() != labels.len() {
            return Err(LearnError::Dimension { expected: rows.len(), found: labels.len() });
        }
        Ok(d)
    }

    pub fn from_instances(instances: &[LabeledInstance]) -> Result<Self, LearnError> {
        let rows: Vec<&[f64]> = instances.iter().map(|i| i.features.as_slice()).collect();
        let labels: Vec<bool> = instances.iter().map(|i| i.label.is_positive()).collect();
        Self::from_rows(&rows, &labels)
    }

    pub fn push(&mut self, row: &[f64], label: bool) -> Result<(), LearnError> {
        if row.len() != self.dim {
            return Err(LearnError::Dimension { expected: self.dim, found: row.len() });
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let p = self.labels.iter().filter(|&&l| l).count();
        (p, self.labels.len() - p)
    }

    /// Same rows with the labels permuted by a seeded shuffle.
    pub fn with_shuffled_labels(&self, seed: u64) -> Self {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut labels = self.labels.clone();
        labels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        Self { dim: self.dim, values: self.values.clone(), labels }
    }

    /// Hex SHA-256 over dimension, values and labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for v in &self.values {
            h.update(v.to_bits().to_le_bytes());
        }
        for &l in &self.labels {
            h.update([l as u8]);
        }
        hex::encode(h.finalize())
    }
}

/// Deterministic sub-seed for a (seed, stream, index) triple.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25))
}

/// A trained base classifier over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseModel {
    Knn(KnnModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Bayes(GaussianNb),
}

impl BaseModel {
    /// Probability of the positive class.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        match self {
            BaseModel::Knn(m) => m.predict_proba(x),
            BaseModel::Tree(m) => m.predict_proba(x),
            BaseModel::Forest(m) => m.predict_proba(x),
            BaseModel::Bayes(m) => m.predict_proba(x),
        }
    }

    /// `(positive, p)` with the `p >= 0.5` rule.
    pub fn predict(&self, x: &[f64]) -> Result<(bool, f64), LearnError> {
        let p = self.predict_proba(x)?;
        Ok((p >= 0.5, p))
    }
}

/// Train one roster member on already standardized rows.
pub fn train_base(kind: BaseKind, data: &Dataset, config: &LearnConfig, seed: u64) -> Result<BaseModel, LearnError> {
    if data.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let all: Vec<usize> = (0..data.len()).collect();
    Ok(match kind {
        k if k.knn_k().is_some() => {
            BaseModel::Knn(KnnModel::new(k.knn_k().unwrap_or(1), std::sync::Arc::new(NeighborStore::build(data, &all))))
        }
        BaseKind::DecisionTree => BaseModel::Tree(DecisionTree::fit(data, &config.tree, seed)),
        BaseKind::RandomForest => BaseModel::Forest(RandomForest::fit(data, &config.forest, seed)),
        _ => BaseModel::Bayes(GaussianNb::fit(data, config.nb_var_floor)),
    })
}

fn check_dim(expected: usize, x: &[f64]) -> Result<(), LearnError> {
    if x.len() != expected {
        return Err(LearnError::Dimension { expected, found: x.len() });
    }
    Ok(())
}
