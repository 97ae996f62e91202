use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_dim, Dataset, LearnError};

/// Training points shared by every kNN member. Only features that vary
/// across the training set are kept: a constant feature adds the same term
/// to every distance and cannot change the neighbor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborStore {
    dim: usize,
    active: Vec<usize>,
    points: Vec<f64>,
    labels: Vec<bool>,
}

impl NeighborStore {
    pub fn build(data: &Dataset, indices: &[usize]) -> Self {
        let dim = data.dim();
        let active: Vec<usize> = (0..dim)
            .filter(|&f| {
                let mut it = indices.iter().map(|&i| data.row(i)[f]);
                match it.next() {
                    Some(first) => it.any(|v| v != first),
                    None => false,
                }
            })
            .collect();
        let mut points = Vec::with_capacity(indices.len() * active.len());
        for &i in indices {
            let r = data.row(i);
            points.extend(active.iter().map(|&f| r[f]));
        }
        Self { dim, active, points, labels: indices.iter().map(|&i| data.label(i)).collect() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Indices of the `k` nearest training points, ordered by distance and
    /// then by lower index.
    pub fn nearest(&self, x: &[f64], k: usize) -> Result<Vec<usize>, LearnError> {
        check_dim(self.dim, x)?;
        let q: Vec<f64> = self.active.iter().map(|&f| x[f]).collect();
        let a = q.len();
        let k = k.min(self.len());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k == 0 {
            return Ok(Vec::new());
        }
        for (i, p) in self.points.chunks_exact(a.max(1)).take(self.len()).enumerate() {
            let d: f64 = if a == 0 { 0.0 } else { q.iter().zip(p).map(|(u, v)| (u - v) * (u - v)).sum() };
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        if a == 0 {
            // no informative feature: every point is at distance 0
            return Ok((0..k).collect());
        }
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    /// Positive share among the first `k` of an ordered neighbor list.
    pub fn share_positive(&self, neighbors: &[usize], k: usize) -> f64 {
        let k = k.min(neighbors.len());
        neighbors[..k].iter().filter(|&&i| self.labels[i]).count() as f64 / k as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub store: Arc<NeighborStore>,
}

impl KnnModel {
    pub fn new(k: usize, store: Arc<NeighborStore>) -> Self {
        Self { k: k.max(1), store }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        let nn = self.store.nearest(x, self.k)?;
        Ok(self.store.share_positive(&nn, self.k))
    }
}
