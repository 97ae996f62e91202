use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, Dataset, LearnError, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { p_positive: f64, n: u32 },
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
}

/// CART classifier with Gini impurity. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    dim: usize,
    nodes: Vec<Node>,
}

struct Best {
    k: usize,
    threshold: f64,
    gain: f64,
}

/// Presorted builder: every candidate feature keeps its `(value, slot)`
/// pairs sorted within each node's range, so splits only need a stable
/// partition instead of a fresh sort.
struct Builder<'a> {
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    labels: Vec<bool>,
    feats: Vec<usize>,
    cols: Vec<Vec<(f64, u32)>>,
    go_left: Vec<bool>,
    tmp: Vec<(f64, u32)>,
}

fn gini_sum(n: f64, pos: f64) -> f64 {
    // n * gini(pos / n)
    if n == 0.0 {
        0.0
    } else {
        n - (pos * pos + (n - pos) * (n - pos)) / n
    }
}

impl Builder<'_> {
    fn leaf(&mut self, n: usize, n_pos: usize) -> u32 {
        self.nodes.push(Node::Leaf { p_positive: n_pos as f64 / n as f64, n: n as u32 });
        (self.nodes.len() - 1) as u32
    }

    /// Returns false if feature `k` is constant over the node.
    fn scan(&self, k: usize, start: usize, end: usize, n_pos: usize, best: &mut Option<Best>) -> bool {
        let col = &self.cols[k][start..end];
        let n = col.len();
        if col[0].0 == col[n - 1].0 {
            return false;
        }
        let min_leaf = self.params.min_leaf.max(1);
        let nf = n as f64;
        let parent = gini_sum(nf, n_pos as f64);
        let mut left_pos = 0usize;
        for i in 1..n {
            left_pos += self.labels[col[i - 1].1 as usize] as usize;
            if i < min_leaf || n - i < min_leaf {
                continue;
            }
            let (a, b) = (col[i - 1].0, col[i].0);
            if a == b {
                continue;
            }
            let child = gini_sum(i as f64, left_pos as f64) + gini_sum((n - i) as f64, (n_pos - left_pos) as f64);
            let gain = (parent - child) / nf;
            if gain > 1e-12 && best.as_ref().is_none_or(|bst| gain > bst.gain) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                *best = Some(Best { k, threshold, gain });
            }
        }
        true
    }

    fn build(&mut self, start: usize, end: usize, depth: usize, constant: &mut [bool]) -> u32 {
        let n = end - start;
        if self.feats.is_empty() {
            let n_pos = self.labels.iter().filter(|&&l| l).count();
            return self.leaf(n, n_pos);
        }
        let n_pos = self.cols[0][start..end].iter().filter(|(_, s)| self.labels[*s as usize]).count();
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) || n_pos == 0 || n_pos == n {
            return self.leaf(n, n_pos);
        }
        let mut best = None;
        match self.params.max_features {
            None => {
                for k in 0..self.feats.len() {
                    if !constant[k] && !self.scan(k, start, end, n_pos, &mut best) {
                        constant[k] = true;
                    }
                }
            }
            Some(m) => {
                // draw features without replacement; constant ones do not count
                let mut order: Vec<usize> = (0..self.feats.len()).filter(|&k| !constant[k]).collect();
                order.shuffle(&mut self.rng);
                let mut visited = 0;
                for k in order {
                    if visited >= m.max(1) {
                        break;
                    }
                    if self.scan(k, start, end, n_pos, &mut best) {
                        visited += 1;
                    } else {
                        constant[k] = true;
                    }
                }
            }
        }
        let Some(best) = best else {
            return self.leaf(n, n_pos);
        };
        for &(v, s) in &self.cols[best.k][start..end] {
            self.go_left[s as usize] = v <= best.threshold;
        }
        let mut n_left = 0;
        for c in 0..self.cols.len() {
            let col = &mut self.cols[c];
            self.tmp.clear();
            let mut w = start;
            for r in start..end {
                let e = col[r];
                if self.go_left[e.1 as usize] {
                    col[w] = e;
                    w += 1;
                } else {
                    self.tmp.push(e);
                }
            }
            col[w..end].copy_from_slice(&self.tmp);
            n_left = w - start;
        }
        let mid = start + n_left;
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { p_positive: 0.0, n: 0 });
        let mut cl = constant.to_vec();
        let left = self.build(start, mid, depth + 1, &mut cl);
        let mut cr = constant.to_vec();
        let right = self.build(mid, end, depth + 1, &mut cr);
        self.nodes[me] = Node::Split { feature: self.feats[best.k] as u32, threshold: best.threshold, left, right };
        me as u32
    }
}

impl DecisionTree {
    pub fn fit(data: &Dataset, params: &TreeParams, seed: u64) -> Self {
        let idx: Vec<usize> = (0..data.len()).collect();
        Self::fit_rows(data, idx, params, seed)
    }

    /// Fit on the given row indices (duplicates allowed, as in a bootstrap).
    pub fn fit_rows(data: &Dataset, idx: Vec<usize>, params: &TreeParams, seed: u64) -> Self {
        if idx.is_empty() {
            return Self { dim: data.dim(), nodes: vec![Node::Leaf { p_positive: 0.0, n: 0 }] };
        }
        let mut feats = Vec::new();
        let mut cols = Vec::new();
        for f in 0..data.dim() {
            let first = data.row(idx[0])[f];
            if idx.iter().all(|&i| data.row(i)[f] == first) {
                continue;
            }
            let mut col: Vec<(f64, u32)> = idx.iter().enumerate().map(|(s, &i)| (data.row(i)[f], s as u32)).collect();
            col.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            feats.push(f);
            cols.push(col);
        }
        let mut b = Builder {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
            labels: idx.iter().map(|&i| data.label(i)).collect(),
            go_left: vec![false; idx.len()],
            tmp: Vec::with_capacity(idx.len()),
            feats,
            cols,
        };
        let mut constant = vec![false; b.feats.len()];
        b.build(0, idx.len(), 0, &mut constant);
        Self { dim: data.dim(), nodes: b.nodes }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        check_dim(self.dim, x)?;
        Ok(self.leaf_value(x))
    }

    pub(crate) fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { p_positive, .. } => return *p_positive,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature as usize] <= *threshold { *left as usize } else { *right as usize };
                }
            }
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Single-class training data yields a constant predictor.
    pub fn is_constant(&self) -> bool {
        self.nodes.len() == 1
    }
}
