use serde::{Deserialize, Serialize};

use super::{check_dim, Dataset, LearnError};

/// Gaussian naive Bayes with a fixed variance floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// index 0 = negative, 1 = positive
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
    present: [bool; 2],
}

impl GaussianNb {
    pub fn fit(data: &Dataset, var_floor: f64) -> Self {
        let d = data.dim();
        let mut count = [0usize; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        for i in 0..data.len() {
            let c = data.label(i) as usize;
            count[c] += 1;
            for (m, v) in mean[c].iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        for c in 0..2 {
            if count[c] > 0 {
                mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
            }
        }
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for i in 0..data.len() {
            let c = data.label(i) as usize;
            for ((s, v), m) in var[c].iter_mut().zip(data.row(i)).zip(&mean[c]) {
                *s += (v - m) * (v - m);
            }
        }
        for c in 0..2 {
            let n = count[c].max(1) as f64;
            var[c].iter_mut().for_each(|s| *s = (*s / n).max(var_floor));
        }
        let total = data.len().max(1) as f64;
        let log_prior = [0, 1].map(|c| if count[c] > 0 { (count[c] as f64 / total).ln() } else { 0.0 });
        Self { log_prior, mean, var, present: [count[0] > 0, count[1] > 0] }
    }

    /// Single-class training data yields a constant predictor.
    pub fn is_constant(&self) -> bool {
        !(self.present[0] && self.present[1])
    }

    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(&self.mean[c])
            .zip(&self.var[c])
            .map(|((v, m), s)| -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / s))
            .sum();
        self.log_prior[c] + ll
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        check_dim(self.mean[0].len(), x)?;
        match self.present {
            [false, _] => return Ok(1.0),
            [_, false] => return Ok(0.0),
            _ => {}
        }
        let (l0, l1) = (self.log_joint(0, x), self.log_joint(1, x));
        // logistic of the log-odds, computed stably
        let z = l1 - l0;
        Ok(if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) })
    }
}
