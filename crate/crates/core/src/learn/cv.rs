use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ensemble::train_stacked_on;
use super::{cohens_kappa, derive_seed, BaseKind, ConfusionMatrix, Dataset, LearnConfig, LearnError};

const OUTER_SPLIT_STREAM: u64 = 0x0C5F;
const OUTER_FIT_STREAM: u64 = 0x0CF1;

pub const ENSEMBLE_NAME: &str = "stacked_ensemble";

/// Instrumentation hooks called with the original dataset indices that
/// reach each fitting step. `fold` is the outer cross-validation fold.
pub trait TrainingProbe: Sync {
    /// Validation indices of outer fold `fold`, reported before it trains.
    fn on_fold(&self, _fold: usize, _validation: &[usize]) {}
    fn on_scaler_fit(&self, _fold: Option<usize>, _indices: &[usize]) {}
    fn on_smote_input(&self, _fold: Option<usize>, _indices: &[usize]) {}
}

pub struct NoProbe;

impl TrainingProbe for NoProbe {}

/// Stratified `k`-fold split over label positions. Each class is shuffled
/// with the seed and dealt round-robin, continuing where the previous class
/// stopped, so fold sizes differ by at most one. Folds are returned sorted.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let k = k.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for m in members {
            folds[next % k].push(m);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub classifier: String,
    pub mean_kappa: f64,
    pub fold_kappas: Vec<f64>,
    pub confusion: Vec<ConfusionMatrix>,
}

impl ReportRow {
    pub fn pooled(&self) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for c in &self.confusion {
            m += *c;
        }
        m
    }

    pub fn std_kappa(&self) -> f64 {
        let n = self.fold_kappas.len() as f64;
        (self.fold_kappas.iter().map(|k| (k - self.mean_kappa).powi(2)).sum::<f64>() / n).sqrt()
    }
}

/// Mean Cohen's kappa per classifier, ranked best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
}

impl EvaluationReport {
    pub fn row(&self, classifier: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.classifier == classifier)
    }

    pub fn ensemble(&self) -> &ReportRow {
        self.row(ENSEMBLE_NAME).expect("report always holds the ensemble row")
    }

    /// Highest-ranked roster member.
    pub fn best_base(&self) -> &ReportRow {
        self.rows.iter().find(|r| r.classifier != ENSEMBLE_NAME).expect("report holds base rows")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,classifier,mean_kappa,std_kappa,tp,fn,fp,tn\n");
        for (i, r) in self.rows.iter().enumerate() {
            let m = r.pooled();
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{},{},{},{}",
                i + 1,
                r.classifier,
                r.mean_kappa,
                r.std_kappa(),
                m.true_positive(),
                m.false_negative(),
                m.false_positive(),
                m.true_negative()
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}-fold cross-validation, seed {}\n", self.folds, self.seed);
        let _ = writeln!(out, "{:>4}  {:<22} {:>10} {:>8}", "rank", "classifier", "mean kappa", "std");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(out, "{:>4}  {:<22} {:>10.3} {:>8.3}", i + 1, r.classifier, r.mean_kappa, r.std_kappa());
        }
        out
    }
}

/// Stratified k-fold evaluation of the eight bases and the stacked ensemble.
/// SMOTE and the scaler only ever see the training part of a fold.
pub fn cross_validate(
    data: &Dataset,
    folds: usize,
    config: &LearnConfig,
    seed: u64,
    probe: &dyn TrainingProbe,
) -> Result<EvaluationReport, LearnError> {
    config.validate()?;
    let (positive, negative) = data.class_counts();
    if folds < 2 || positive < folds || negative < folds {
        return Err(LearnError::TooFewInstances { folds, positive, negative });
    }
    let split = stratified_folds(data.labels(), folds, derive_seed(seed, OUTER_SPLIT_STREAM, 0));
    for (f, val) in split.iter().enumerate() {
        probe.on_fold(f, val);
    }

    // per fold: 9 confusion matrices, ensemble first then roster order
    let per_fold: Vec<[ConfusionMatrix; 9]> = split
        .par_iter()
        .enumerate()
        .map(|(f, val)| {
            let mut in_val = vec![false; data.len()];
            val.iter().for_each(|&i| in_val[i] = true);
            let train: Vec<usize> = (0..data.len()).filter(|&i| !in_val[i]).collect();
            let model = train_stacked_on(data, &train, config, derive_seed(seed, OUTER_FIT_STREAM, f as u64), probe, Some(f))?;
            let mut cms = [ConfusionMatrix::default(); 9];
            for &i in val {
                let base = model.base_probabilities(data.row(i))?;
                let p = model.meta.predict_proba(&base)?;
                cms[0].record(data.label(i), p >= 0.5);
                for (b, pb) in base.iter().enumerate() {
                    cms[b + 1].record(data.label(i), *pb >= 0.5);
                }
            }
            Ok(cms)
        })
        .collect::<Result<_, LearnError>>()?;

    let names = std::iter::once(ENSEMBLE_NAME).chain(BaseKind::ALL.iter().map(|k| k.name()));
    let mut rows = names
        .enumerate()
        .map(|(c, name)| {
            let confusion: Vec<ConfusionMatrix> = per_fold.iter().map(|cms| cms[c]).collect();
            let fold_kappas = confusion.iter().map(cohens_kappa).collect::<Result<Vec<_>, _>>()?;
            let mean_kappa = fold_kappas.iter().sum::<f64>() / fold_kappas.len() as f64;
            Ok(ReportRow { classifier: name.to_string(), mean_kappa, fold_kappas, confusion })
        })
        .collect::<Result<Vec<_>, LearnError>>()?;
    // stable: equal kappas keep roster order
    rows.sort_by(|a, b| b.mean_kappa.total_cmp(&a.mean_kappa));
    Ok(EvaluationReport { folds, seed, rows })
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::learn::ForestParams;

    fn quick() -> LearnConfig {
        LearnConfig { forest: ForestParams { n_trees: 5, ..ForestParams::default() }, ..LearnConfig::default() }
    }

    #[test]
    fn folds_are_stratified_partitions() {
        let labels: Vec<bool> = (0..103).map(|i| i % 5 == 0).collect();
        let folds = stratified_folds(&labels, 10, 4);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        let pos_total = labels.iter().filter(|&&l| l).count() as f64;
        for f in &folds {
            let pos = f.iter().filter(|&&i| labels[i]).count() as f64;
            assert!((pos - pos_total / 10.0).abs() <= 1.0);
            assert!((10..=11).contains(&f.len()));
        }
        assert_eq!(folds, stratified_folds(&labels, 10, 4));
    }

    fn separable(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 7) as f64, if i % 3 == 0 { 5.0 } else { -5.0 }]).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        Dataset::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn determined_label_gives_unit_kappa() {
        let report = cross_validate(&separable(90), 10, &quick(), 1, &NoProbe).unwrap();
        assert_eq!(report.rows.len(), 9);
        for r in &report.rows {
            assert_eq!(r.mean_kappa, 1.0, "{}", r.classifier);
        }
        assert_eq!(report.rows[0].classifier, ENSEMBLE_NAME);
        assert!(report.to_csv().lines().count() == 10);
    }

    #[derive(Default)]
    struct Recorder(Mutex<Vec<(Option<usize>, Vec<usize>)>>);

    impl TrainingProbe for Recorder {
        fn on_scaler_fit(&self, fold: Option<usize>, indices: &[usize]) {
            self.0.lock().unwrap().push((fold, indices.to_vec()));
        }
        fn on_smote_input(&self, fold: Option<usize>, indices: &[usize]) {
            self.0.lock().unwrap().push((fold, indices.to_vec()));
        }
    }

    #[test]
    fn validation_rows_never_reach_fitting() {
        let d = separable(60);
        let rec = Recorder::default();
        cross_validate(&d, 10, &quick(), 2, &rec).unwrap();
        let folds = stratified_folds(d.labels(), 10, derive_seed(2, OUTER_SPLIT_STREAM, 0));
        let calls = rec.0.into_inner().unwrap();
        // per fold: 1 scaler fit + 5 inner SMOTE + 1 full SMOTE
        assert_eq!(calls.len(), 70);
        for (fold, idx) in calls {
            let f = fold.unwrap();
            assert!(idx.iter().all(|i| !folds[f].contains(i)));
        }
    }

    #[test]
    fn too_few_per_class() {
        let d = Dataset::from_rows(&(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>(), &(0..30).map(|i| i < 5).collect::<Vec<_>>())
            .unwrap();
        assert!(matches!(cross_validate(&d, 10, &quick(), 1, &NoProbe), Err(LearnError::TooFewInstances { .. })));
    }
}
