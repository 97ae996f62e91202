use serde::{Deserialize, Serialize};

use super::LearnError;

/// 2×2 counts indexed `[actual][predicted]`, index 0 = positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 2]; 2]);

impl ConfusionMatrix {
    pub fn new(m: [[u64; 2]; 2]) -> Self {
        Self(m)
    }

    pub fn record(&mut self, actual: bool, predicted: bool) {
        self.0[!actual as usize][!predicted as usize] += 1;
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut m = Self::default();
        for (a, p) in pairs {
            m.record(a, p);
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn true_positive(&self) -> u64 {
        self.0[0][0]
    }

    pub fn false_negative(&self) -> u64 {
        self.0[0][1]
    }

    pub fn false_positive(&self) -> u64 {
        self.0[1][0]
    }

    pub fn true_negative(&self) -> u64 {
        self.0[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        (self.0[0][0] + self.0[1][1]) as f64 / self.total() as f64
    }
}

impl std::ops::AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for r in 0..2 {
            for c in 0..2 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
    }
}

/// Cohen's kappa. A matrix with all mass on one cell of the diagonal has
/// `p_e = 1` and scores 1.
pub fn cohens_kappa(cm: &ConfusionMatrix) -> Result<f64, LearnError> {
    let total = cm.total();
    if total == 0 {
        return Err(LearnError::EmptyMatrix);
    }
    let n = total as f64;
    let m = cm.0.map(|r| r.map(|v| v as f64));
    let p_o = (m[0][0] + m[1][1]) / n;
    let p_e = (0..2).map(|c| (m[c][0] + m[c][1]) * (m[0][c] + m[1][c])).sum::<f64>() / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(if (p_o - 1.0).abs() < 1e-15 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn worked_example() {
        let k = cohens_kappa(&ConfusionMatrix::new([[40, 10], [5, 45]])).unwrap();
        assert!((k - 0.7).abs() < 1e-9, "{k}");
    }

    #[test]
    fn perfect_and_chance() {
        assert_eq!(cohens_kappa(&ConfusionMatrix::new([[50, 0], [0, 50]])).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&ConfusionMatrix::new([[50, 0], [50, 0]])).unwrap(), 0.0);
        assert_eq!(cohens_kappa(&ConfusionMatrix::new([[7, 0], [0, 0]])).unwrap(), 1.0);
        assert!(matches!(cohens_kappa(&ConfusionMatrix::default()), Err(LearnError::EmptyMatrix)));
    }

    #[test]
    fn record_layout() {
        let m = ConfusionMatrix::from_pairs([(true, true), (true, false), (false, true), (false, false), (false, false)]);
        assert_eq!(m.0, [[1, 1], [1, 2]]);
        assert_eq!((m.true_positive(), m.false_negative(), m.false_positive(), m.true_negative()), (1, 1, 1, 2));
    }

    proptest! {
        #[test]
        fn kappa_is_bounded(a in 0u64..500, b in 0u64..500, c in 0u64..500, d in 0u64..500) {
            prop_assume!(a + b + c + d > 0);
            let k = cohens_kappa(&ConfusionMatrix::new([[a, b], [c, d]])).unwrap();
            prop_assert!((-1.0..=1.0).contains(&k));
        }

        #[test]
        fn diagonal_is_one(a in 0u64..500, d in 0u64..500) {
            prop_assume!(a + d > 0);
            prop_assert_eq!(cohens_kappa(&ConfusionMatrix::new([[a, 0], [0, d]])).unwrap(), 1.0);
        }
    }
}
