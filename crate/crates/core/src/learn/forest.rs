use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, derive_seed, Dataset, DecisionTree, ForestParams, LearnError, TreeParams};

const TREE_STREAM: u64 = 0x7EE5;

/// Bagged CART trees with `floor(sqrt(d))` candidate features per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dim: usize,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(data: &Dataset, params: &ForestParams, seed: u64) -> Self {
        let n = data.len();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            max_features: Some(((data.dim() as f64).sqrt().floor() as usize).max(1)),
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let s = derive_seed(seed, TREE_STREAM, t as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTree::fit_rows(data, sample, &tree_params, rng.random())
            })
            .collect();
        Self { dim: data.dim(), trees }
    }

    pub fn from_trees(trees: Vec<DecisionTree>, dim: usize) -> Self {
        Self { dim, trees }
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Mean of the trees' leaf frequencies.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        check_dim(self.dim, x)?;
        if self.trees.is_empty() {
            return Ok(0.0);
        }
        Ok(self.trees.iter().map(|t| t.leaf_value(x)).sum::<f64>() / self.trees.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_stumps_average_to_the_stump() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = [false, false, false, true, true, false];
        let d = Dataset::from_rows(&rows, &labels).unwrap();
        let stump = DecisionTree::fit(&d, &TreeParams { max_depth: 1, min_leaf: 3, max_features: None }, 0);
        let forest = RandomForest::from_trees(vec![stump.clone(); 7], 1);
        for x in [0.0, 2.5, 5.0] {
            assert!((forest.predict_proba(&[x]).unwrap() - stump.predict_proba(&[x]).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i * 7 % 11) as f64, (i % 3) as f64, 1.0]).collect();
        let labels: Vec<bool> = (0..40).map(|i| (i * 7 % 11) > 5).collect();
        let d = Dataset::from_rows(&rows, &labels).unwrap();
        let p = ForestParams { n_trees: 10, ..ForestParams::default() };
        assert_eq!(RandomForest::fit(&d, &p, 3), RandomForest::fit(&d, &p, 3));
        let f = RandomForest::fit(&d, &p, 3);
        assert_eq!(f.trees().len(), 10);
        let acc = rows.iter().zip(&labels).filter(|(r, &l)| (f.predict_proba(r).unwrap() >= 0.5) == l).count();
        assert!(acc >= 36, "{acc}");
    }
}
