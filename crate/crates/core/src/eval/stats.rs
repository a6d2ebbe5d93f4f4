use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::ablation::BacktestReport;
use super::metrics::median;
use super::EvalError;
use crate::features::ScenarioId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    /// `None` when either variable is constant.
    pub r: Option<f64>,
    pub p_value: Option<f64>,
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties sharing their mid-rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as f64 / 2.0;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    pearson(&mid_ranks(x), &mid_ranks(y))
}

/// Two-sided p-value of a correlation under the t approximation with n − 2 dof.
pub fn correlation_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let dof = (n - 2) as f64;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

fn correlation(x: &[f64], y: &[f64], f: fn(&[f64], &[f64]) -> Option<f64>) -> Correlation {
    let r = f(x, y);
    Correlation { n: x.len(), r, p_value: r.and_then(|r| correlation_p_value(r, x.len())) }
}

/// One row per stock of the liquidity/attention inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockAttention {
    pub symbol: String,
    pub sector: String,
    pub liquidity: f64,
    pub median_daily_tweets: f64,
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorAttention {
    pub sector: String,
    pub n_stocks: usize,
    pub median_liquidity: Option<f64>,
    pub median_daily_tweets: Option<f64>,
    pub median_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub scenario: ScenarioId,
    pub liquidity_improvement_pearson: Correlation,
    pub liquidity_improvement_spearman: Correlation,
    pub tweets_liquidity_pearson: Correlation,
    pub tweets_liquidity_spearman: Correlation,
    pub stocks: Vec<StockAttention>,
    pub sectors: Vec<SectorAttention>,
}

/// Correlations between option liquidity, improvement over the dummy and
/// tweet attention, plus per-sector medians.
pub fn liquidity_attention_stats(scenario: ScenarioId, stocks: Vec<StockAttention>) -> Result<CorrelationTable, EvalError> {
    if stocks.len() < 3 {
        return Err(EvalError::InsufficientStocks(stocks.len()));
    }
    let liq: Vec<f64> = stocks.iter().map(|s| s.liquidity).collect();
    let imp: Vec<f64> = stocks.iter().map(|s| s.improvement).collect();
    let tw: Vec<f64> = stocks.iter().map(|s| s.median_daily_tweets).collect();

    let mut by_sector: BTreeMap<&str, Vec<&StockAttention>> = BTreeMap::new();
    for s in &stocks {
        by_sector.entry(s.sector.as_str()).or_default().push(s);
    }
    let sectors = by_sector
        .into_iter()
        .map(|(sector, rows)| SectorAttention {
            sector: sector.to_string(),
            n_stocks: rows.len(),
            median_liquidity: median(rows.iter().map(|s| s.liquidity)),
            median_daily_tweets: median(rows.iter().map(|s| s.median_daily_tweets)),
            median_improvement: median(rows.iter().map(|s| s.improvement)),
        })
        .collect();

    Ok(CorrelationTable {
        scenario,
        liquidity_improvement_pearson: correlation(&liq, &imp, pearson),
        liquidity_improvement_spearman: correlation(&liq, &imp, spearman),
        tweets_liquidity_pearson: correlation(&tw, &liq, pearson),
        tweets_liquidity_spearman: correlation(&tw, &liq, spearman),
        stocks,
        sectors,
    })
}

/// Collects the attention rows of `scenario` from a report. Stocks missing
/// liquidity, tweets or a defined improvement are skipped.
pub fn attention_rows(report: &BacktestReport, scenario: ScenarioId) -> Vec<StockAttention> {
    report
        .stocks
        .iter()
        .filter_map(|s| {
            Some(StockAttention {
                symbol: s.symbol.clone(),
                sector: s.sector.clone(),
                liquidity: s.liquidity?,
                median_daily_tweets: s.median_daily_tweets?,
                improvement: s.scenario(scenario)?.improvement?,
            })
        })
        .collect()
}
