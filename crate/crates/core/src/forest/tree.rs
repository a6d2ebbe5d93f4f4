//! CART classification tree grown by exact weighted-Gini minimization.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ForestConfig, ForestError};

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    x: Vec<f64>,
    y: Vec<u8>,
}

impl Dataset {
    pub fn new(n_features: usize, x: Vec<f64>, y: Vec<u8>) -> Result<Self, ForestError> {
        if y.is_empty() {
            return Err(ForestError::EmptyData);
        }
        if n_features == 0 || x.len() != n_features * y.len() {
            return Err(ForestError::SchemaMismatch { expected: n_features, got: x.len() / y.len().max(1) });
        }
        if let Some(&bad) = y.iter().find(|&&v| v > 1) {
            return Err(ForestError::InvalidLabel(bad));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(ForestError::NanFeature);
        }
        Ok(Self { n_features, x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[u8]) -> Result<Self, ForestError> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.len() != y.len() {
            return Err(ForestError::EmptyData);
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n_features) {
            return Err(ForestError::SchemaMismatch { expected: n_features, got: r.len() });
        }
        Self::new(n_features, rows.concat(), y.to_vec())
    }

    pub fn n_samples(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row * self.n_features + feature]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.x[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn label(&self, row: usize) -> u8 {
        self.y[row]
    }

    pub fn labels(&self) -> &[u8] {
        &self.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
        samples: u32,
    },
    Leaf {
        neg: u32,
        pos: u32,
    },
}

impl Node {
    /// Training samples (bootstrap duplicates included) that reached the node.
    pub fn samples(&self) -> u32 {
        match *self {
            Node::Leaf { neg, pos } => neg + pos,
            Node::Split { samples, .. } => samples,
        }
    }
}

/// Flat arena of nodes; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Positive-class fraction of the leaf `row` lands in.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[feature] <= threshold { left as usize } else { right as usize };
                }
                Node::Leaf { neg, pos } => return pos as f64 / (neg + pos) as f64,
            }
        }
    }

    /// Index of the leaf `row` lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0usize;
        while let Node::Split { feature, threshold, left, right, .. } = self.nodes[i] {
            i = if row[feature] <= threshold { left as usize } else { right as usize };
        }
        i
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left as usize).max(go(nodes, right as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Weighted Gini of a split kept as an exact rational:
/// Σ_children pos·neg/n, compared by cross multiplication.
#[derive(Debug, Clone, Copy)]
struct Impurity {
    num: u128,
    den: u128,
}

impl Impurity {
    fn of(left_pos: u64, left_n: u64, right_pos: u64, right_n: u64) -> Self {
        let (lp, ln, rp, rn) = (left_pos as u128, left_n as u128, right_pos as u128, right_n as u128);
        let num = lp * (ln - lp) * rn + rp * (rn - rp) * ln;
        Self { num, den: ln * rn }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: Impurity,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        match self.impurity.cmp(&other.impurity) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => (self.feature, self.threshold) < (other.feature, other.threshold),
        }
    }
}

/// Number of features drawn per node.
pub fn features_per_split(config: &ForestConfig, n_features: usize) -> usize {
    config.max_features.resolve(n_features)
}

/// Grows one tree on the samples listed in `indices` (duplicates allowed).
pub fn fit_tree_on<R: Rng + ?Sized>(
    data: &Dataset,
    indices: &[usize],
    config: &ForestConfig,
    rng: &mut R,
) -> Result<Tree, ForestError> {
    if indices.is_empty() {
        return Err(ForestError::EmptyData);
    }
    let mut builder = Builder {
        data,
        config,
        n_try: features_per_split(config, data.n_features()),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(indices.len()),
    };
    let mut idx = indices.to_vec();
    builder.grow(&mut idx, 0, rng);
    Ok(Tree { nodes: builder.nodes })
}

/// Grows one tree on the full dataset.
pub fn fit_tree<R: Rng + ?Sized>(data: &Dataset, config: &ForestConfig, rng: &mut R) -> Result<Tree, ForestError> {
    let all: Vec<usize> = (0..data.n_samples()).collect();
    fit_tree_on(data, &all, config, rng)
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a ForestConfig,
    n_try: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

impl Builder<'_> {
    fn grow<R: Rng + ?Sized>(&mut self, idx: &mut [usize], depth: usize, rng: &mut R) -> u32 {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.data.label(i) == 1).count();
        let id = self.nodes.len() as u32;
        let leaf = Node::Leaf { neg: (n - pos) as u32, pos: pos as u32 };

        let stop = depth >= self.config.max_depth
            || n < self.config.min_samples_split
            || n < 2 * self.config.min_samples_leaf
            || pos == 0
            || pos == n;
        if stop {
            self.nodes.push(leaf);
            return id;
        }

        let Some(best) = self.best_split(idx, rng) else {
            self.nodes.push(leaf);
            return id;
        };

        // placeholder, patched once children exist
        self.nodes.push(leaf);
        let mid = partition(idx, |&i| self.data.value(i, best.feature) <= best.threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id as usize] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            samples: n as u32,
        };
        id
    }

    /// Scans a random permutation of features. The first `n_try` are always
    /// examined; later ones only while no valid split has been found.
    fn best_split<R: Rng + ?Sized>(&mut self, idx: &[usize], rng: &mut R) -> Option<Candidate> {
        let mut order: Vec<usize> = (0..self.data.n_features()).collect();
        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        for (k, &feature) in order.iter().enumerate() {
            if k >= self.n_try && best.is_some() {
                break;
            }
            if let Some(c) = self.best_for_feature(idx, feature) {
                if best.as_ref().is_none_or(|b| c.beats(b)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_for_feature(&mut self, idx: &[usize], feature: usize) -> Option<Candidate> {
        let min_leaf = self.config.min_samples_leaf.max(1);
        self.scratch.clear();
        self.scratch
            .extend(idx.iter().map(|&i| (self.data.value(i, feature), self.data.label(i))));
        self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

        let n = self.scratch.len();
        let total_pos = self.scratch.iter().filter(|p| p.1 == 1).count() as u64;
        let mut left_pos = 0u64;
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            left_pos += self.scratch[i].1 as u64;
            let (lo, hi) = (self.scratch[i].0, self.scratch[i + 1].0);
            if lo >= hi {
                continue;
            }
            let left_n = (i + 1) as u64;
            let right_n = n as u64 - left_n;
            if (left_n as usize) < min_leaf || (right_n as usize) < min_leaf {
                continue;
            }
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let c = Candidate {
                feature,
                threshold,
                impurity: Impurity::of(left_pos, left_n, total_pos - left_pos, right_n),
            };
            if best.as_ref().is_none_or(|b| c.beats(b)) {
                best = Some(c);
            }
        }
        best
    }
}

/// Moves the elements satisfying `pred` to the front and returns their count.
fn partition<T, F: Fn(&T) -> bool>(xs: &mut [T], pred: F) -> usize {
    let mut k = 0;
    for i in 0..xs.len() {
        if pred(&xs[i]) {
            xs.swap(i, k);
            k += 1;
        }
    }
    k
}
