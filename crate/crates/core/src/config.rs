//! Run configuration: one flat TOML file.

use std::path::{Path, PathBuf};

use chrono::{FixedOffset, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::PlanParams;
use crate::features::{ScenarioId, Source};
use crate::forest::{ForestConfig, MAX_DEPTH_GRID, MIN_SAMPLES_LEAF_GRID, MIN_SAMPLES_SPLIT_GRID, N_TREES};
use crate::hmm::FitOptions;
use crate::sentiment::SessionClock;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub prices: Option<PathBuf>,
    /// Precomputed `symbol,date,iv`; takes precedence over `chains`.
    pub iv: Option<PathBuf>,
    pub chains: Option<PathBuf>,
    pub rates: Option<PathBuf>,
    /// Tweet JSONL, or pre-scored `symbol,ts,score` CSV.
    pub tweets: Option<PathBuf>,
    /// `symbol,liquidity`; otherwise derived from chain volumes when present.
    pub liquidity: Option<PathBuf>,
    /// Defaults to the bundled sector universe.
    pub universe: Option<PathBuf>,
    /// Defaults to the bundled lexicon.
    pub lexicon: Option<PathBuf>,
    /// Restricts the run to these tickers; empty means every priced ticker.
    pub symbols: Vec<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub scenarios: Vec<u8>,
    pub n_trees: usize,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub initial_train: usize,
    pub test_window: usize,
    pub step: usize,
    pub regimes: bool,
    pub regime_scenario: u8,
    pub hmm_states: usize,
    pub hmm_iter: usize,
    pub hmm_tolerance: f64,
    /// Last date of HMM training data; defaults to the end of the initial
    /// walk-forward training window.
    pub hmm_train_end: Option<NaiveDate>,
    pub attention_scenario: u8,
    pub session_close: String,
    pub utc_offset: String,
    pub write_matrices: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let plan = PlanParams::default();
        let hmm = FitOptions::default();
        Self {
            prices: None,
            iv: None,
            chains: None,
            rates: None,
            tweets: None,
            liquidity: None,
            universe: None,
            lexicon: None,
            symbols: Vec::new(),
            out: PathBuf::from("report"),
            seed: crate::forest::DEFAULT_SEED,
            scenarios: (1..=7).collect(),
            n_trees: N_TREES,
            max_depth: MAX_DEPTH_GRID.to_vec(),
            min_samples_split: MIN_SAMPLES_SPLIT_GRID.to_vec(),
            min_samples_leaf: MIN_SAMPLES_LEAF_GRID.to_vec(),
            initial_train: plan.initial_train,
            test_window: plan.test_window,
            step: plan.step,
            regimes: true,
            regime_scenario: 7,
            hmm_states: hmm.n_states,
            hmm_iter: hmm.n_iter,
            hmm_tolerance: hmm.tolerance,
            hmm_train_end: None,
            attention_scenario: 7,
            session_close: "16:00".into(),
            utc_offset: "-05:00".into(),
            write_matrices: false,
        }
    }
}

impl RunConfig {
    /// Parses a config file. Relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.display().to_string(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.prices,
            &mut self.iv,
            &mut self.chains,
            &mut self.rates,
            &mut self.tweets,
            &mut self.liquidity,
            &mut self.universe,
            &mut self.lexicon,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out);
    }

    pub fn scenario_ids(&self) -> Vec<ScenarioId> {
        let mut ids: Vec<ScenarioId> = self.scenarios.iter().filter_map(|&s| ScenarioId::new(s).ok()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn grid(&self) -> Vec<ForestConfig> {
        ForestConfig::grid_from(&self.max_depth, &self.min_samples_split, &self.min_samples_leaf, self.n_trees, self.seed)
    }

    pub fn plan(&self) -> PlanParams {
        PlanParams { initial_train: self.initial_train, test_window: self.test_window, step: self.step }
    }

    pub fn hmm_options(&self) -> FitOptions {
        FitOptions { n_states: self.hmm_states, n_iter: self.hmm_iter, tolerance: self.hmm_tolerance, seed: self.seed }
    }

    fn parse_close(&self) -> Option<NaiveTime> {
        NaiveTime::parse_from_str(&self.session_close, "%H:%M")
            .or_else(|_| NaiveTime::parse_from_str(&self.session_close, "%H:%M:%S"))
            .ok()
    }

    fn parse_offset(&self) -> Option<FixedOffset> {
        format!("2000-01-01T00:00:00{}", self.utc_offset)
            .parse::<chrono::DateTime<FixedOffset>>()
            .ok()
            .map(|d| *d.offset())
    }

    pub fn clock(&self) -> SessionClock {
        SessionClock {
            close: self.parse_close().unwrap_or(SessionClock::default().close),
            utc_offset: self.parse_offset().unwrap_or(SessionClock::default().utc_offset),
        }
    }

    pub fn uses_tweets(&self) -> bool {
        self.scenario_ids().iter().any(|s| s.uses(Source::Tweets))
    }

    /// Collects every problem before any data is read.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut need = |name: &str, p: &Option<PathBuf>, required: bool| match p {
            Some(p) if !p.is_file() => errs.push(format!("{name}: {} does not exist", p.display())),
            None if required => errs.push(format!("{name}: required but not set")),
            _ => {}
        };
        need("prices", &self.prices, true);
        need("iv", &self.iv, false);
        need("chains", &self.chains, false);
        need("rates", &self.rates, false);
        need("tweets", &self.tweets, self.uses_tweets());
        need("liquidity", &self.liquidity, false);
        need("universe", &self.universe, false);
        need("lexicon", &self.lexicon, false);
        if self.iv.is_none() && self.chains.is_none() {
            errs.push("one of iv or chains must be set".into());
        }
        if self.scenarios.is_empty() {
            errs.push("scenarios must not be empty".into());
        }
        for &s in &self.scenarios {
            if ScenarioId::new(s).is_err() {
                errs.push(format!("scenarios: {s} is not a scenario (1-7)"));
            }
        }
        for (name, s) in [("regime_scenario", self.regime_scenario), ("attention_scenario", self.attention_scenario)] {
            if ScenarioId::new(s).is_err() {
                errs.push(format!("{name}: {s} is not a scenario (1-7)"));
            }
        }
        if self.regimes && !self.scenarios.contains(&self.regime_scenario) {
            errs.push(format!("regime_scenario {} is not among the run's scenarios", self.regime_scenario));
        }
        if self.n_trees == 0 {
            errs.push("n_trees must be positive".into());
        }
        for (name, g) in [
            ("max_depth", &self.max_depth),
            ("min_samples_split", &self.min_samples_split),
            ("min_samples_leaf", &self.min_samples_leaf),
        ] {
            if g.is_empty() {
                errs.push(format!("{name} grid must not be empty"));
            }
        }
        if self.min_samples_split.iter().any(|&s| s < 2) {
            errs.push("min_samples_split values must be >= 2".into());
        }
        if self.min_samples_leaf.contains(&0) {
            errs.push("min_samples_leaf values must be >= 1".into());
        }
        for (name, v) in [("initial_train", self.initial_train), ("test_window", self.test_window), ("step", self.step)] {
            if v == 0 {
                errs.push(format!("{name} must be positive"));
            }
        }
        if self.hmm_states == 0 {
            errs.push("hmm_states must be positive".into());
        }
        if self.hmm_iter == 0 {
            errs.push("hmm_iter must be positive".into());
        }
        if !(self.hmm_tolerance >= 0.0 && self.hmm_tolerance.is_finite()) {
            errs.push("hmm_tolerance must be a non-negative number".into());
        }
        if self.parse_close().is_none() {
            errs.push(format!("session_close {:?} is not HH:MM", self.session_close));
        }
        if self.parse_offset().is_none() {
            errs.push(format!("utc_offset {:?} is not +HH:MM / -HH:MM", self.utc_offset));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}
