use serde::{Deserialize, Serialize};

use super::{check_dim, Dataset, LearnError};

/// Per-feature z-score with population standard deviation. Constant
/// features map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Fit on the rows at `indices`.
    pub fn fit(data: &Dataset, indices: &[usize]) -> Result<Self, LearnError> {
        if indices.is_empty() {
            return Err(LearnError::EmptyData);
        }
        let d = data.dim();
        let n = indices.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in indices {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &i in indices {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        !(self.std[feature] > 0.0)
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        check_dim(self.dim(), x)?;
        Ok(x
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_and_zeroes_constants() {
        let d = Dataset::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]], &[true, false]).unwrap();
        let s = Scaler::fit(&d, &[0, 1]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 0.0]);
        assert!(s.is_constant(1));
        assert_eq!(s.transform(&[3.0, 9.0]).unwrap(), vec![1.0, 0.0]);
        assert!(s.transform(&[1.0]).is_err());
    }
}
