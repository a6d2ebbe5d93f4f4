use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{auc_opt, fnv1a, mean, median, mix_seed, stratified_dummy};
use super::regimes::RegimeReport;
use super::stats::CorrelationTable;
use super::walkforward::{make_plan, PlanParams};
use super::EvalError;
use crate::features::{build_matrix, Feature, FeatureMatrix, PricePoint, ScenarioId};
use crate::forest::{fit_forest, Dataset, ForestConfig};
use crate::ivindex::IvPoint;
use crate::sentiment::DailySocialStats;

/// Everything known about one stock.
#[derive(Debug, Clone, PartialEq)]
pub struct StockData {
    pub symbol: String,
    pub sector: String,
    pub prices: Vec<PricePoint>,
    pub iv: Vec<IvPoint>,
    pub social: Vec<DailySocialStats>,
    /// Average daily dollar option volume.
    pub liquidity: Option<f64>,
}

impl StockData {
    pub fn matrix(&self, scenario: ScenarioId) -> Result<FeatureMatrix, EvalError> {
        Ok(build_matrix(&self.prices, &self.iv, &self.social, scenario)?)
    }

    pub fn median_daily_tweets(&self) -> Option<f64> {
        median(self.social.iter().map(|s| s.tweet_count as f64))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    pub scenarios: Vec<ScenarioId>,
    pub grid: Vec<ForestConfig>,
    pub plan: PlanParams,
    /// Seeds the dummy baseline; forest seeds live in the grid configs.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpan {
    pub index: usize,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub config_id: usize,
    pub config: String,
    /// `None` where the fold's test labels are single-class.
    pub fold_auc: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
    /// AUC over all test days of all folds at once.
    pub pooled_auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayPrediction {
    pub date: NaiveDate,
    pub fold: usize,
    pub label: u8,
    pub score: f64,
    pub dummy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioId,
    pub columns: Vec<Feature>,
    pub folds: Vec<FoldSpan>,
    pub grid: Vec<ConfigResult>,
    /// Index into `grid` of the configuration with the best mean fold AUC.
    pub best_config: usize,
    pub auc: Option<f64>,
    pub dummy_fold_auc: Vec<Option<f64>>,
    pub dummy_auc: Option<f64>,
    pub improvement: Option<f64>,
    /// Test-day scores of the selected configuration and the dummy.
    pub predictions: Vec<DayPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockResult {
    pub symbol: String,
    pub sector: String,
    pub n_rows: usize,
    pub liquidity: Option<f64>,
    pub median_daily_tweets: Option<f64>,
    pub scenarios: Vec<ScenarioResult>,
}

impl StockResult {
    pub fn scenario(&self, id: ScenarioId) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.scenario == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub seed: u64,
    pub plan: PlanParams,
    pub n_trees: usize,
    pub grid: Vec<String>,
    pub stocks: Vec<StockResult>,
    pub regimes: Option<RegimeReport>,
    pub attention: Option<CorrelationTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioId,
    pub sources: String,
    pub n_features: usize,
    pub n_stocks: usize,
    pub median_auc: Option<f64>,
    pub median_dummy_auc: Option<f64>,
    pub median_improvement: Option<f64>,
    pub n_beating_dummy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorImprovement {
    pub sector: String,
    pub symbol: String,
    pub auc: Option<f64>,
    pub dummy_auc: Option<f64>,
    pub improvement: Option<f64>,
}

impl BacktestReport {
    pub fn scenario_ids(&self) -> Vec<ScenarioId> {
        let mut ids: Vec<ScenarioId> = self.stocks.iter().flat_map(|s| s.scenarios.iter().map(|r| r.scenario)).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Median AUC, dummy AUC and improvement across stocks, per scenario.
    pub fn scenario_summary(&self) -> Vec<ScenarioSummary> {
        self.scenario_ids()
            .into_iter()
            .map(|id| {
                let rs: Vec<&ScenarioResult> = self.stocks.iter().filter_map(|s| s.scenario(id)).collect();
                ScenarioSummary {
                    scenario: id,
                    sources: id.label(),
                    n_features: id.features().len(),
                    n_stocks: rs.len(),
                    median_auc: median(rs.iter().filter_map(|r| r.auc)),
                    median_dummy_auc: median(rs.iter().filter_map(|r| r.dummy_auc)),
                    median_improvement: median(rs.iter().filter_map(|r| r.improvement)),
                    n_beating_dummy: rs.iter().filter(|r| r.improvement.is_some_and(|x| x > 0.0)).count(),
                }
            })
            .collect()
    }

    /// Per-stock improvement rows for one scenario, grouped by sector.
    pub fn sector_improvements(&self, scenario: ScenarioId) -> Vec<SectorImprovement> {
        let mut rows: Vec<SectorImprovement> = self
            .stocks
            .iter()
            .filter_map(|s| {
                s.scenario(scenario).map(|r| SectorImprovement {
                    sector: s.sector.clone(),
                    symbol: s.symbol.clone(),
                    auc: r.auc,
                    dummy_auc: r.dummy_auc,
                    improvement: r.improvement,
                })
            })
            .collect();
        rows.sort_by(|a, b| (&a.sector, &a.symbol).cmp(&(&b.sector, &b.symbol)));
        rows
    }
}

/// Walk-forward evaluation of every grid configuration on one matrix.
///
/// Each configuration is refit on every fold's training span and scored on
/// its test span. The dummy baseline is drawn per fold from
/// `mix_seed(dummy_seed, fold)` using only the training labels.
pub fn evaluate_matrix(
    matrix: &FeatureMatrix,
    grid: &[ForestConfig],
    plan: PlanParams,
    dummy_seed: u64,
) -> Result<ScenarioResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::InvalidPlan("empty configuration grid".into()));
    }
    let plan = make_plan(matrix.n_rows(), plan)?;
    let labels = &matrix.targets;

    let fold_data: Vec<Dataset> = plan
        .folds
        .iter()
        .map(|f| Dataset::from_rows(&matrix.rows[f.train.clone()], &labels[f.train.clone()]))
        .collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|c| (0..plan.folds.len()).map(move |f| (c, f))).collect();
    let scores: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let fold = &plan.folds[f];
            let forest = fit_forest(&fold_data[f], &grid[c])?;
            Ok(forest.predict_many(&matrix.rows[fold.test.clone()])?)
        })
        .collect::<Result<_, EvalError>>()?;
    let scores_of = |c: usize, f: usize| &scores[c * plan.folds.len() + f];

    let grid_results: Vec<ConfigResult> = grid
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let fold_auc: Vec<Option<f64>> = plan
                .folds
                .iter()
                .map(|fold| auc_opt(scores_of(c, fold.index), &labels[fold.test.clone()]))
                .collect();
            let pooled: Vec<f64> = plan.folds.iter().flat_map(|fold| scores_of(c, fold.index).iter().copied()).collect();
            let pooled_labels: Vec<u8> = plan.folds.iter().flat_map(|fold| labels[fold.test.clone()].iter().copied()).collect();
            ConfigResult {
                config_id: c,
                config: cfg.label(),
                mean_auc: mean(fold_auc.iter().flatten().copied()),
                fold_auc,
                pooled_auc: auc_opt(&pooled, &pooled_labels),
            }
        })
        .collect();

    let mut best = 0;
    for (c, r) in grid_results.iter().enumerate() {
        let better = match (r.mean_auc, grid_results[best].mean_auc) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best = c;
        }
    }

    let dummies: Vec<Vec<f64>> = plan
        .folds
        .iter()
        .map(|f| stratified_dummy(&labels[f.train.clone()], f.test.len(), mix_seed(dummy_seed, f.index as u64)))
        .collect();
    let dummy_fold_auc: Vec<Option<f64>> = plan
        .folds
        .iter()
        .map(|f| auc_opt(&dummies[f.index], &labels[f.test.clone()]))
        .collect();
    // same folds as the model: definedness depends only on the test labels
    let dummy_auc = mean(
        dummy_fold_auc
            .iter()
            .zip(&grid_results[best].fold_auc)
            .filter(|(_, m)| m.is_some())
            .filter_map(|(d, _)| *d),
    );
    let auc = grid_results[best].mean_auc;

    let predictions = plan
        .folds
        .iter()
        .flat_map(|f| {
            let s = scores_of(best, f.index);
            let d = &dummies[f.index];
            f.test.clone().enumerate().map(move |(k, row)| DayPrediction {
                date: matrix.dates[row],
                fold: f.index,
                label: labels[row],
                score: s[k],
                dummy: d[k],
            })
        })
        .collect();

    let folds = plan
        .folds
        .iter()
        .map(|f| FoldSpan {
            index: f.index,
            train_start: matrix.dates[f.train.start],
            train_end: matrix.dates[f.train.end - 1],
            test_start: matrix.dates[f.test.start],
            test_end: matrix.dates[f.test.end - 1],
            n_train: f.train.len(),
            n_test: f.test.len(),
        })
        .collect();

    Ok(ScenarioResult {
        scenario: matrix.scenario,
        columns: matrix.columns.clone(),
        folds,
        grid: grid_results,
        best_config: best,
        auc,
        dummy_fold_auc,
        dummy_auc,
        improvement: auc.zip(dummy_auc).map(|(m, d)| m - d),
        predictions,
    })
}

/// Dummy seed for one stock; shared by all of its scenarios so they are
/// compared against the same baseline draws.
pub fn stock_dummy_seed(seed: u64, symbol: &str) -> u64 {
    mix_seed(seed, fnv1a(symbol))
}

/// Runs every requested scenario for every stock.
pub fn run_ablation(stocks: &[StockData], settings: &AblationSettings) -> Result<BacktestReport, EvalError> {
    let mut results = Vec::with_capacity(stocks.len());
    for stock in stocks {
        let dummy_seed = stock_dummy_seed(settings.seed, &stock.symbol);
        let mut scenarios = Vec::with_capacity(settings.scenarios.len());
        let mut n_rows = 0;
        for &sc in &settings.scenarios {
            let m = stock.matrix(sc)?;
            n_rows = m.n_rows();
            scenarios.push(evaluate_matrix(&m, &settings.grid, settings.plan, dummy_seed)?);
        }
        results.push(StockResult {
            symbol: stock.symbol.clone(),
            sector: stock.sector.clone(),
            n_rows,
            liquidity: stock.liquidity,
            median_daily_tweets: stock.median_daily_tweets(),
            scenarios,
        });
    }
    Ok(BacktestReport {
        seed: settings.seed,
        plan: settings.plan,
        n_trees: settings.grid.first().map_or(0, |c| c.n_trees),
        grid: settings.grid.iter().map(ForestConfig::label).collect(),
        stocks: results,
        regimes: None,
        attention: None,
    })
}
