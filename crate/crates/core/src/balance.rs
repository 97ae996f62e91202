//! SMOTE oversampling of the minority class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::features::{FeatureVector, LabeledInstance, StationMonth, LANDUSE_OFFSET};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BalanceError {
    #[error("both classes must be present (positive {positive}, negative {negative})")]
    EmptyClass { positive: usize, negative: usize },
    #[error("minority class has a single instance; SMOTE needs at least two")]
    SingleMinority,
    #[error("neighbor count k must be at least 1")]
    InvalidK,
    #[error("row {row} has {found} features, expected {expected}")]
    Dimension { row: usize, expected: usize, found: usize },
}

/// A synthetic row `base + u * (neighbor - base)`; indices refer to the input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow {
    pub values: Vec<f64>,
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oversampled {
    pub minority_label: bool,
    pub synthetic: Vec<SyntheticRow>,
}

/// Minority-fitted z-score used only for neighbor search.
struct MinorityScale {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl MinorityScale {
    fn fit(rows: &[&[f64]]) -> Self {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std = var.iter().map(|s| if *s > 0.0 { 1.0 / (s / n).sqrt() } else { 0.0 }).collect();
        Self { mean, inv_std }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.inv_std).map(|((v, m), s)| (v - m) * s).collect()
    }
}

/// `k` nearest other rows of `i` by squared distance, ties to the lower index.
fn nearest(z: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (j, zj) in z.iter().enumerate() {
        if j == i {
            continue;
        }
        let d: f64 = z[i].iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

/// Generate minority rows until both classes have equal size.
///
/// Bases are taken round-robin over a seeded shuffle of the minority; each
/// picks one of its `min(k, minority - 1)` nearest minority neighbors
/// uniformly and interpolates with `u ~ U[0, 1)`.
pub fn oversample(rows: &[&[f64]], labels: &[bool], k: usize, seed: u64) -> Result<Oversampled, BalanceError> {
    if k == 0 {
        return Err(BalanceError::InvalidK);
    }
    let positive = labels.iter().filter(|&&l| l).count();
    let negative = labels.len() - positive;
    if positive == 0 || negative == 0 {
        return Err(BalanceError::EmptyClass { positive, negative });
    }
    let dim = rows[0].len();
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(BalanceError::Dimension { row, expected: dim, found: r.len() });
    }
    let minority_label = positive < negative;
    if positive == negative {
        return Ok(Oversampled { minority_label, synthetic: Vec::new() });
    }
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
    if minority.len() < 2 {
        return Err(BalanceError::SingleMinority);
    }
    let needed = positive.abs_diff(negative);
    let k_eff = k.min(minority.len() - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..minority.len()).collect();
    order.shuffle(&mut rng);

    let min_rows: Vec<&[f64]> = minority.iter().map(|&i| rows[i]).collect();
    let scale = MinorityScale::fit(&min_rows);
    let z: Vec<Vec<f64>> = min_rows.iter().map(|r| scale.apply(r)).collect();
    let used = &order[..needed.min(order.len())];
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); minority.len()];
    let found: Vec<(usize, Vec<usize>)> = used.par_iter().map(|&b| (b, nearest(&z, b, k_eff))).collect();
    for (b, nn) in found {
        neighbors[b] = nn;
    }

    let synthetic = (0..needed)
        .map(|s| {
            let b = order[s % order.len()];
            let nn = neighbors[b][rng.random_range(0..k_eff)];
            let u: f64 = rng.random();
            let (x, y) = (min_rows[b], min_rows[nn]);
            let values = x.iter().zip(y).map(|(a, c)| a + u * (c - a)).collect();
            SyntheticRow { values, base: minority[b], neighbor: minority[nn], u }
        })
        .collect();
    Ok(Oversampled { minority_label, synthetic })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSet {
    pub instances: Vec<LabeledInstance>,
    pub synthetic_flags: Vec<bool>,
    /// `(base, neighbor, u)` for synthetic entries, indices into the input.
    pub origins: Vec<Option<(usize, usize, f64)>>,
}

impl BalancedSet {
    pub fn n_synthetic(&self) -> usize {
        self.synthetic_flags.iter().filter(|&&f| f).count()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.instances.iter().filter(|i| i.label.is_positive()).count();
        (pos, self.instances.len() - pos)
    }
}

/// SMOTE over labeled instances. Originals come first, in input order,
/// followed by the synthetic instances.
pub fn smote(instances: &[LabeledInstance], k: usize, seed: u64) -> Result<BalancedSet, BalanceError> {
    let rows: Vec<&[f64]> = instances.iter().map(|i| i.features.as_slice()).collect();
    let labels: Vec<bool> = instances.iter().map(|i| i.label.is_positive()).collect();
    if rows.is_empty() {
        return Err(BalanceError::EmptyClass { positive: 0, negative: 0 });
    }
    let out = oversample(&rows, &labels, k, seed)?;

    let mut balanced = instances.to_vec();
    let mut flags = vec![false; instances.len()];
    let mut origins = vec![None; instances.len()];
    for (n, mut s) in out.synthetic.into_iter().enumerate() {
        // absorb last-ulp rounding at the [0, 1] fraction bounds
        s.values[LANDUSE_OFFSET..].iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let base = &instances[s.base];
        let other = &instances[s.neighbor];
        balanced.push(LabeledInstance {
            key: StationMonth { station_id: format!("{}~smote{}", base.key.station_id, n + 1), ..base.key.clone() },
            features: FeatureVector::from_vec(s.values).expect("interpolated vector stays valid"),
            score: base.score + s.u * (other.score - base.score),
            label: base.label,
        });
        flags.push(true);
        origins.push(Some((s.base, s.neighbor, s.u)));
    }
    Ok(BalancedSet { instances: balanced, synthetic_flags: flags, origins })
}
