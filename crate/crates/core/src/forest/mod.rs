//! Bagged CART ensemble with soft voting.
//!
//! Every tree is trained on a bootstrap of the training rows drawn from its
//! own ChaCha stream `(seed, tree index)`, so trees can be grown in parallel
//! without changing the result. The forest score of a row is the mean of the
//! positive-class fractions of the leaves it reaches.

mod tree;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tree::{features_per_split, fit_tree, fit_tree_on, Dataset, Node, Tree};

pub const N_TREES: usize = 1000;
pub const MAX_DEPTH_GRID: [usize; 4] = [4, 6, 8, 10];
pub const MIN_SAMPLES_SPLIT_GRID: [usize; 4] = [5, 10, 15, 20];
pub const MIN_SAMPLES_LEAF_GRID: [usize; 4] = [1, 3, 5, 8];
pub const DEFAULT_SEED: u64 = 42;

const ARTIFACT_FORMAT: &str = "ivnowcast-forest";
const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("EmptyData: no training samples")]
    EmptyData,
    #[error("SchemaMismatch: expected {expected} features, got {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),
    #[error("feature matrix contains NaN")]
    NanFeature,
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("unsupported forest artifact: {0}")]
    BadArtifact(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// ⌈√f⌉ features per node.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
    pub max_features: MaxFeatures,
    /// Bootstrap resampling; off means each tree sees the training set as is.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: N_TREES,
            max_depth: 6,
            min_samples_split: 10,
            min_samples_leaf: 3,
            seed: DEFAULT_SEED,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    /// The 4 × 4 × 4 hyperparameter grid, depth-major.
    pub fn grid(n_trees: usize, seed: u64) -> Vec<ForestConfig> {
        Self::grid_from(&MAX_DEPTH_GRID, &MIN_SAMPLES_SPLIT_GRID, &MIN_SAMPLES_LEAF_GRID, n_trees, seed)
    }

    pub fn grid_from(
        depths: &[usize],
        splits: &[usize],
        leaves: &[usize],
        n_trees: usize,
        seed: u64,
    ) -> Vec<ForestConfig> {
        let mut out = Vec::with_capacity(depths.len() * splits.len() * leaves.len());
        for &max_depth in depths {
            for &min_samples_split in splits {
                for &min_samples_leaf in leaves {
                    out.push(ForestConfig {
                        n_trees,
                        max_depth,
                        min_samples_split,
                        min_samples_leaf,
                        seed,
                        max_features: MaxFeatures::Sqrt,
                        bootstrap: true,
                    });
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        format!("d{}_s{}_l{}", self.max_depth, self.min_samples_split, self.min_samples_leaf)
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig("n_trees must be > 0".into()));
        }
        if self.min_samples_split < 2 {
            return Err(ForestError::InvalidConfig("min_samples_split must be >= 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(ForestError::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        if let MaxFeatures::Count(0) = self.max_features {
            return Err(ForestError::InvalidConfig("max_features must be >= 1".into()));
        }
        Ok(())
    }

    /// RNG stream for one tree.
    pub fn tree_rng(&self, tree_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(tree_index as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest, ForestError> {
    config.validate()?;
    let n = data.n_samples();
    if n == 0 {
        return Err(ForestError::EmptyData);
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = config.tree_rng(i);
            let sample: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(data, &sample, config, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Forest { config: config.clone(), n_features: data.n_features(), trees })
}

impl Forest {
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, ForestError> {
        if row.len() != self.n_features {
            return Err(ForestError::SchemaMismatch { expected: self.n_features, got: row.len() });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, ForestError> {
        rows.par_iter().map(|r| self.predict_proba(r)).collect()
    }

    pub fn to_json(&self) -> Result<String, ForestError> {
        Ok(serde_json::to_string(&Artifact {
            format: ARTIFACT_FORMAT.into(),
            version: ARTIFACT_VERSION,
            forest: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let a: Artifact = serde_json::from_str(s)?;
        if a.format != ARTIFACT_FORMAT || a.version != ARTIFACT_VERSION {
            return Err(ForestError::BadArtifact(format!("{} v{}", a.format, a.version)));
        }
        Ok(a.forest)
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ForestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Artifact {
    format: String,
    version: u32,
    #[serde(flatten)]
    forest: Forest,
}
