//! Walk-forward evaluation, AUC scoring and report assembly.

pub mod ablation;
pub mod metrics;
pub mod regimes;
pub mod stats;
pub mod walkforward;

use chrono::NaiveDate;
use thiserror::Error;

use crate::features::FeatureError;
use crate::forest::ForestError;

pub use ablation::{
    evaluate_matrix, run_ablation, AblationSettings, BacktestReport, ConfigResult, DayPrediction, FoldSpan,
    ScenarioResult, ScenarioSummary, SectorImprovement, StockData, StockResult,
};
pub use metrics::{auc, auc_opt, median, stratified_dummy};
pub use regimes::{regime_report, RegimeReport};
pub use stats::{liquidity_attention_stats, pearson, spearman, CorrelationTable, StockAttention};
pub use walkforward::{make_plan, Fold, PlanParams, WalkForwardPlan};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("not enough data: {n_days} days, initial training window needs more than {initial_train}")]
    NotEnoughData { n_days: usize, initial_train: usize },
    #[error("invalid walk-forward plan: {0}")]
    InvalidPlan(String),
    #[error("AUC undefined: test labels are single-class")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("need at least 3 stocks for correlation statistics, got {0}")]
    InsufficientStocks(usize),
    #[error("no regime for {symbol}{}", date.map(|d| format!(" on {d}")).unwrap_or_default())]
    RegimeGap { symbol: String, date: Option<NaiveDate> },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}
