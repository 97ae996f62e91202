use serde::{Deserialize, Serialize};

use super::{check_dim, LearnError, LogisticParams};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic regression fitted by full-batch gradient descent from
/// zero weights. The bias is not regularized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], bias: 0.0 }
    }

    pub fn fit<R: AsRef<[f64]>>(x: &[R], y: &[bool], params: &LogisticParams) -> Result<Self, LearnError> {
        let dim = x.first().map(|r| r.as_ref().len()).ok_or(LearnError::EmptyData)?;
        if x.len() != y.len() {
            return Err(LearnError::Dimension { expected: x.len(), found: y.len() });
        }
        for r in x {
            check_dim(dim, r.as_ref())?;
        }
        let mut m = Self::zeros(dim);
        for _ in 0..params.epochs {
            let (_, gw, gb) = m.loss_and_gradient(x, y, params.l2);
            for (w, g) in m.weights.iter_mut().zip(&gw) {
                *w -= params.learning_rate * g;
            }
            m.bias -= params.learning_rate * gb;
        }
        Ok(m)
    }

    /// Mean log-loss plus `l2 / 2 * |w|^2`, with its gradient
    /// `(d/dw, d/db)`.
    pub fn loss_and_gradient<R: AsRef<[f64]>>(&self, x: &[R], y: &[bool], l2: f64) -> (f64, Vec<f64>, f64) {
        let n = x.len() as f64;
        let mut loss = 0.0;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (r, &t) in x.iter().zip(y) {
            let r = r.as_ref();
            let z = self.bias + r.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>();
            let t = t as u8 as f64;
            // log(1 + e^z) - t z, stable for large |z|
            loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
            let e = sigmoid(z) - t;
            for (g, a) in gw.iter_mut().zip(r) {
                *g += e * a;
            }
            gb += e;
        }
        loss /= n;
        gb /= n;
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (loss, gw, gb)
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, LearnError> {
        check_dim(self.weights.len(), x)?;
        Ok(self.bias + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        Ok(sigmoid(self.decision(x)?))
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_model_is_one_half() {
        let m = LogisticRegression::zeros(8);
        assert_eq!(m.predict_proba(&[0.5; 8]).unwrap(), 0.5);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(3..12);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
            let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
            let m = LogisticRegression {
                weights: (0..4).map(|_| rng.random_range(-2.0..2.0)).collect(),
                bias: rng.random_range(-1.0..1.0),
            };
            let (_, gw, gb) = m.loss_and_gradient(&x, &y, 1e-4);
            let h = 1e-6;
            for j in 0..5 {
                let bump = |d: f64| {
                    let mut m2 = m.clone();
                    if j < 4 {
                        m2.weights[j] += d;
                    } else {
                        m2.bias += d;
                    }
                    m2.loss_and_gradient(&x, &y, 1e-4).0
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = if j < 4 { gw[j] } else { gb };
                assert!((fd - an).abs() / an.abs().max(1e-8) < 1e-5 || (fd - an).abs() < 1e-9, "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn separable_data_is_fitted() {
        let x = vec![vec![0.0], vec![0.1], vec![0.9], vec![1.0]];
        let y = [false, false, true, true];
        let m = LogisticRegression::fit(&x, &y, &LogisticParams::default()).unwrap();
        for (r, &t) in x.iter().zip(&y) {
            assert_eq!(m.predict_proba(r).unwrap() >= 0.5, t);
        }
    }
}
