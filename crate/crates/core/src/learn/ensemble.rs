use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{stratified_folds, NoProbe, TrainingProbe};
use super::{
    derive_seed, BaseKind, BaseModel, Dataset, DecisionTree, GaussianNb, KnnModel, LearnConfig, LearnError,
    LogisticRegression, NeighborStore, RandomForest, Scaler,
};
use crate::balance::oversample;
use crate::features::LabeledInstance;

const SMOTE_STREAM: u64 = 0x5307;
const TREE_STREAM: u64 = 0x7233;
const FOREST_STREAM: u64 = 0xF023;
const INNER_SPLIT_STREAM: u64 = 0x1A50;
const INNER_FIT_STREAM: u64 = 0x1AF1;
const FULL_FIT_STREAM: u64 = 0xF111;

/// Predicted class with the probability of the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProbability {
    pub positive: bool,
    pub probability: f64,
}

impl ClassProbability {
    pub fn from_probability(probability: f64) -> Self {
        Self { positive: probability >= 0.5, probability }
    }

    /// Probability of the predicted class, in `[0.5, 1]`.
    pub fn certainty(&self) -> f64 {
        self.probability.max(1.0 - self.probability)
    }
}

mod arc_store {
    use std::sync::Arc;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::NeighborStore;

    pub fn serialize<S: Serializer>(v: &Arc<NeighborStore>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Arc<NeighborStore>, D::Error> {
        NeighborStore::deserialize(d).map(Arc::new)
    }
}

/// The eight trained roster members. The five kNN members share one
/// neighbor store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRoster {
    #[serde(with = "arc_store")]
    pub neighbors: Arc<NeighborStore>,
    pub tree: DecisionTree,
    pub forest: RandomForest,
    pub bayes: GaussianNb,
}

impl BaseRoster {
    /// Fit every member on already standardized, balanced rows.
    pub fn fit(train: &Dataset, config: &LearnConfig, seed: u64) -> Self {
        let all: Vec<usize> = (0..train.len()).collect();
        let ((neighbors, tree), (forest, bayes)) = rayon::join(
            || {
                (
                    NeighborStore::build(train, &all),
                    DecisionTree::fit(train, &config.tree, derive_seed(seed, TREE_STREAM, 0)),
                )
            },
            || {
                (
                    RandomForest::fit(train, &config.forest, derive_seed(seed, FOREST_STREAM, 0)),
                    GaussianNb::fit(train, config.nb_var_floor),
                )
            },
        );
        Self { neighbors: Arc::new(neighbors), tree, forest, bayes }
    }

    /// Positive-class probabilities in roster order for a standardized row.
    pub fn probabilities(&self, z: &[f64]) -> Result<[f64; 8], LearnError> {
        let nn = self.neighbors.nearest(z, 5)?;
        let mut p = [0.0; 8];
        for k in 1..=5 {
            p[k - 1] = self.neighbors.share_positive(&nn, k);
        }
        p[5] = self.tree.predict_proba(z)?;
        p[6] = self.forest.predict_proba(z)?;
        p[7] = self.bayes.predict_proba(z)?;
        Ok(p)
    }

    pub fn model(&self, kind: BaseKind) -> BaseModel {
        match kind {
            BaseKind::DecisionTree => BaseModel::Tree(self.tree.clone()),
            BaseKind::RandomForest => BaseModel::Forest(self.forest.clone()),
            BaseKind::GaussianNaiveBayes => BaseModel::Bayes(self.bayes.clone()),
            k => BaseModel::Knn(KnnModel::new(k.knn_k().unwrap_or(1), self.neighbors.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub inner_folds: usize,
    pub n_train: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_synthetic: usize,
    pub data_fingerprint: String,
    /// Members that degenerated to a constant predictor.
    pub constant_bases: Vec<BaseKind>,
    pub config: LearnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub scaler: Scaler,
    pub bases: BaseRoster,
    pub meta: LogisticRegression,
    pub metadata: TrainingMetadata,
}

impl EnsembleModel {
    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    /// Base probabilities in roster order for a raw feature row.
    pub fn base_probabilities(&self, x: &[f64]) -> Result<[f64; 8], LearnError> {
        self.bases.probabilities(&self.scaler.transform(x)?)
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassProbability, LearnError> {
        let p = self.base_probabilities(x)?;
        Ok(ClassProbability::from_probability(self.meta.predict_proba(&p)?))
    }

    pub fn predict_many<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<Vec<ClassProbability>, LearnError> {
        rows.par_iter().map(|r| self.predict(r.as_ref())).collect()
    }

    /// One roster member's prediction for a raw feature row.
    pub fn predict_base(&self, kind: BaseKind, x: &[f64]) -> Result<ClassProbability, LearnError> {
        let z = self.scaler.transform(x)?;
        Ok(ClassProbability::from_probability(self.bases.model(kind).predict_proba(&z)?))
    }

    /// Hex SHA-256 of the serialized model.
    pub fn fingerprint(&self) -> String {
        super::persist::fingerprint(self)
    }
}

/// SMOTE-balance the rows at `idx`, standardize with `scaler`, and fit the roster.
fn fit_roster(
    data: &Dataset,
    scaler: &Scaler,
    idx: &[usize],
    config: &LearnConfig,
    seed: u64,
    probe: &dyn TrainingProbe,
    fold: Option<usize>,
) -> Result<(BaseRoster, usize), LearnError> {
    probe.on_smote_input(fold, idx);
    let rows: Vec<&[f64]> = idx.iter().map(|&i| data.row(i)).collect();
    let labels: Vec<bool> = idx.iter().map(|&i| data.label(i)).collect();
    let over = oversample(&rows, &labels, config.smote_k, derive_seed(seed, SMOTE_STREAM, 0))?;
    let mut train = Dataset::new(data.dim());
    for (r, &l) in rows.iter().zip(&labels) {
        train.push(&scaler.transform(r)?, l)?;
    }
    for s in &over.synthetic {
        train.push(&scaler.transform(&s.values)?, over.minority_label)?;
    }
    Ok((BaseRoster::fit(&train, config, seed), over.synthetic.len()))
}

/// Train the stacked ensemble on the rows of `data` at `idx`.
///
/// The scaler is fit on the original training rows. Meta inputs are
/// out-of-fold base probabilities from an internal stratified split, with
/// SMOTE applied to each internal training part only; the final bases are
/// refit on the SMOTE-balanced full training set.
pub fn train_stacked_on(
    data: &Dataset,
    idx: &[usize],
    config: &LearnConfig,
    seed: u64,
    probe: &dyn TrainingProbe,
    fold: Option<usize>,
) -> Result<EnsembleModel, LearnError> {
    config.validate()?;
    if idx.is_empty() {
        return Err(LearnError::EmptyData);
    }
    let labels: Vec<bool> = idx.iter().map(|&i| data.label(i)).collect();
    let n_positive = labels.iter().filter(|&&l| l).count();
    let n_negative = labels.len() - n_positive;
    if n_positive == 0 || n_negative == 0 {
        return Err(LearnError::SingleClass);
    }
    if n_positive.min(n_negative) < 3 {
        return Err(LearnError::TooFewInstances { folds: 3, positive: n_positive, negative: n_negative });
    }

    probe.on_scaler_fit(fold, idx);
    let scaler = Scaler::fit(data, idx)?;

    let inner = stratified_folds(&labels, config.inner_folds, derive_seed(seed, INNER_SPLIT_STREAM, 0));
    let parts: Vec<Vec<(usize, [f64; 8])>> = inner
        .par_iter()
        .enumerate()
        .map(|(f, val)| {
            let mut in_val = vec![false; idx.len()];
            val.iter().for_each(|&p| in_val[p] = true);
            let train_idx: Vec<usize> = (0..idx.len()).filter(|&p| !in_val[p]).map(|p| idx[p]).collect();
            let (roster, _) =
                fit_roster(data, &scaler, &train_idx, config, derive_seed(seed, INNER_FIT_STREAM, f as u64), probe, fold)?;
            val.iter()
                .map(|&p| Ok((p, roster.probabilities(&scaler.transform(data.row(idx[p]))?)?)))
                .collect::<Result<Vec<_>, LearnError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut oof = vec![[0.0; 8]; idx.len()];
    for (p, probs) in parts.into_iter().flatten() {
        oof[p] = probs;
    }
    let meta = LogisticRegression::fit(&oof, &labels, &config.meta)?;

    let (bases, n_synthetic) = fit_roster(data, &scaler, idx, config, derive_seed(seed, FULL_FIT_STREAM, 0), probe, fold)?;
    let mut constant_bases = Vec::new();
    if bases.tree.is_constant() {
        constant_bases.push(BaseKind::DecisionTree);
    }
    if bases.bayes.is_constant() {
        constant_bases.push(BaseKind::GaussianNaiveBayes);
    }
    let fingerprint = {
        let mut sub = Dataset::new(data.dim());
        for &i in idx {
            sub.push(data.row(i), data.label(i))?;
        }
        sub.fingerprint()
    };
    Ok(EnsembleModel {
        scaler,
        bases,
        meta,
        metadata: TrainingMetadata {
            seed,
            inner_folds: config.inner_folds,
            n_train: idx.len(),
            n_positive,
            n_negative,
            n_synthetic,
            data_fingerprint: fingerprint,
            constant_bases,
            config: config.clone(),
        },
    })
}

/// Train on every instance.
pub fn train_stacked_ensemble(
    instances: &[LabeledInstance],
    config: &LearnConfig,
    seed: u64,
) -> Result<EnsembleModel, LearnError> {
    let data = Dataset::from_instances(instances)?;
    let all: Vec<usize> = (0..data.len()).collect();
    train_stacked_on(&data, &all, config, seed, &NoProbe, None)
}
