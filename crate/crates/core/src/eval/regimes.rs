use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ablation::BacktestReport;
use super::metrics::{auc_opt, mean, median};
use super::EvalError;
use crate::features::ScenarioId;
use crate::hmm::{Regime, RegimePath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeStockRow {
    pub symbol: String,
    pub sector: String,
    pub regime: Regime,
    pub days: usize,
    pub mean_iv: Option<f64>,
    pub auc: Option<f64>,
    pub dummy_auc: Option<f64>,
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummaryRow {
    pub regime: Regime,
    pub name: String,
    pub median_days: Option<f64>,
    pub median_iv: Option<f64>,
    pub median_dummy_auc: Option<f64>,
    pub median_improvement: Option<f64>,
    pub total_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSectorRow {
    pub sector: String,
    pub regime: Regime,
    pub name: String,
    pub median_improvement: Option<f64>,
    pub n_stocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub scenario: ScenarioId,
    pub n_states: usize,
    pub per_stock: Vec<RegimeStockRow>,
    pub summary: Vec<RegimeSummaryRow>,
    pub by_sector: Vec<RegimeSectorRow>,
}

/// Splits every stock's test days by decoded regime and scores each group.
///
/// Regimes whose test labels are single-class get `None` AUCs and drop out
/// of the medians; their day counts still appear.
pub fn regime_report(
    report: &BacktestReport,
    paths: &BTreeMap<String, RegimePath>,
    scenario: ScenarioId,
) -> Result<RegimeReport, EvalError> {
    let n_states = paths.values().map(|p| p.n_states).max().unwrap_or(0);
    let mut per_stock = Vec::new();
    for stock in &report.stocks {
        let Some(res) = stock.scenario(scenario) else { continue };
        let path = paths
            .get(&stock.symbol)
            .ok_or_else(|| EvalError::RegimeGap { symbol: stock.symbol.clone(), date: None })?;
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_states];
        for (k, p) in res.predictions.iter().enumerate() {
            let i = path
                .dates
                .binary_search(&p.date)
                .map_err(|_| EvalError::RegimeGap { symbol: stock.symbol.clone(), date: Some(p.date) })?;
            groups[path.regimes[i].0].push(k);
            let _ = i;
        }
        for (r, idx) in groups.iter().enumerate() {
            let pick = |f: &dyn Fn(usize) -> f64| idx.iter().map(|&k| f(k)).collect::<Vec<f64>>();
            let labels: Vec<u8> = idx.iter().map(|&k| res.predictions[k].label).collect();
            let model = auc_opt(&pick(&|k| res.predictions[k].score), &labels);
            let dummy = auc_opt(&pick(&|k| res.predictions[k].dummy), &labels);
            let ivs = idx.iter().filter_map(|&k| {
                let d = res.predictions[k].date;
                path.dates.binary_search(&d).ok().map(|i| path.iv[i])
            });
            per_stock.push(RegimeStockRow {
                symbol: stock.symbol.clone(),
                sector: stock.sector.clone(),
                regime: Regime(r),
                days: idx.len(),
                mean_iv: mean(ivs),
                auc: model,
                dummy_auc: dummy,
                improvement: model.zip(dummy).map(|(m, d)| m - d),
            });
        }
    }

    let summary = (0..n_states)
        .map(|r| {
            let rows: Vec<&RegimeStockRow> = per_stock.iter().filter(|x| x.regime.0 == r).collect();
            RegimeSummaryRow {
                regime: Regime(r),
                name: Regime(r).name(n_states),
                median_days: median(rows.iter().map(|x| x.days as f64)),
                median_iv: median(rows.iter().filter_map(|x| x.mean_iv)),
                median_dummy_auc: median(rows.iter().filter_map(|x| x.dummy_auc)),
                median_improvement: median(rows.iter().filter_map(|x| x.improvement)),
                total_days: rows.iter().map(|x| x.days).sum(),
            }
        })
        .collect();

    let mut sectors: BTreeMap<(&str, usize), Vec<f64>> = BTreeMap::new();
    for row in &per_stock {
        let e = sectors.entry((row.sector.as_str(), row.regime.0)).or_default();
        if let Some(i) = row.improvement {
            e.push(i);
        }
    }
    let by_sector = sectors
        .into_iter()
        .map(|((sector, r), imps)| RegimeSectorRow {
            sector: sector.to_string(),
            regime: Regime(r),
            name: Regime(r).name(n_states),
            n_stocks: imps.len(),
            median_improvement: median(imps),
        })
        .collect();

    Ok(RegimeReport { scenario, n_states, per_stock, summary, by_sector })
}
