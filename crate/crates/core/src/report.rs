//! Plot-ready CSV tables and the JSON summary of a backtest.
//!
//! Floats are written in shortest round-trip form and undefined values as
//! empty cells, so identical reports render to identical bytes.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::eval::metrics::median;
use crate::eval::BacktestReport;
use crate::pipeline::{write_err, RunError};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn table(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), RunError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(write_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| RunError::Write { path: path.display().to_string(), source: e.into() };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(write_err(&path))
}

pub fn summary_json(report: &BacktestReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

pub fn read_summary(path: &Path) -> Result<BacktestReport, RunError> {
    let text = fs::read_to_string(path).map_err(|source| crate::io::InputError::Open {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| RunError::BadReport(format!("{}: {e}", path.display())))
}

/// Writes `summary.json` and every CSV table into `dir`.
pub fn write_report(report: &BacktestReport, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    let summary = dir.join("summary.json");
    fs::write(&summary, summary_json(report)).map_err(write_err(&summary))?;
    write_tables(report, dir)
}

/// Writes the CSV tables only.
pub fn write_tables(report: &BacktestReport, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    table(
        dir,
        "scenario_medians.csv",
        &["scenario", "sources", "n_features", "n_stocks", "median_auc", "median_dummy_auc", "median_improvement", "n_beating_dummy"],
        report
            .scenario_summary()
            .into_iter()
            .map(|s| {
                vec![
                    s.scenario.to_string(),
                    s.sources,
                    s.n_features.to_string(),
                    s.n_stocks.to_string(),
                    opt(s.median_auc),
                    opt(s.median_dummy_auc),
                    opt(s.median_improvement),
                    s.n_beating_dummy.to_string(),
                ]
            })
            .collect(),
    )?;

    let mut stock_rows = Vec::new();
    let mut grid_rows = Vec::new();
    let mut fold_rows = Vec::new();
    let mut pred_rows = Vec::new();
    for s in &report.stocks {
        for r in &s.scenarios {
            let best = &r.grid[r.best_config];
            stock_rows.push(vec![
                s.symbol.clone(),
                s.sector.clone(),
                r.scenario.to_string(),
                best.config.clone(),
                opt(r.auc),
                opt(r.dummy_auc),
                opt(r.improvement),
                r.folds.len().to_string(),
            ]);
            for g in &r.grid {
                grid_rows.push(vec![
                    s.symbol.clone(),
                    r.scenario.to_string(),
                    g.config.clone(),
                    opt(g.mean_auc),
                    opt(g.pooled_auc),
                    g.fold_auc.iter().flatten().count().to_string(),
                ]);
            }
            for (f, span) in r.folds.iter().enumerate() {
                fold_rows.push(vec![
                    s.symbol.clone(),
                    r.scenario.to_string(),
                    span.index.to_string(),
                    span.train_start.to_string(),
                    span.train_end.to_string(),
                    span.test_start.to_string(),
                    span.test_end.to_string(),
                    span.n_train.to_string(),
                    span.n_test.to_string(),
                    opt(best.fold_auc[f]),
                    opt(r.dummy_fold_auc[f]),
                ]);
            }
            for p in &r.predictions {
                pred_rows.push(vec![
                    s.symbol.clone(),
                    r.scenario.to_string(),
                    p.date.to_string(),
                    p.fold.to_string(),
                    p.label.to_string(),
                    p.score.to_string(),
                    p.dummy.to_string(),
                ]);
            }
        }
    }
    table(
        dir,
        "stock_scenarios.csv",
        &["symbol", "sector", "scenario", "best_config", "auc", "dummy_auc", "improvement", "n_folds"],
        stock_rows,
    )?;
    table(dir, "grid.csv", &["symbol", "scenario", "config", "mean_auc", "pooled_auc", "defined_folds"], grid_rows)?;
    table(
        dir,
        "folds.csv",
        &[
            "symbol", "scenario", "fold", "train_start", "train_end", "test_start", "test_end", "n_train", "n_test", "auc",
            "dummy_auc",
        ],
        fold_rows,
    )?;
    table(dir, "predictions.csv", &["symbol", "scenario", "date", "fold", "label", "score", "dummy"], pred_rows)?;

    let mut sector_rows = Vec::new();
    let mut sector_summary = Vec::new();
    for sc in report.scenario_ids() {
        let rows = report.sector_improvements(sc);
        let mut sectors: Vec<&str> = rows.iter().map(|r| r.sector.as_str()).collect();
        sectors.dedup();
        for sector in sectors {
            let imps: Vec<f64> = rows.iter().filter(|r| r.sector == sector).filter_map(|r| r.improvement).collect();
            sector_summary.push(vec![sc.to_string(), sector.to_string(), imps.len().to_string(), opt(median(imps))]);
        }
        for r in rows {
            sector_rows.push(vec![sc.to_string(), r.sector, r.symbol, opt(r.auc), opt(r.dummy_auc), opt(r.improvement)]);
        }
    }
    table(dir, "sector_improvement.csv", &["scenario", "sector", "symbol", "auc", "dummy_auc", "improvement"], sector_rows)?;
    table(dir, "sector_summary.csv", &["scenario", "sector", "n_stocks", "median_improvement"], sector_summary)?;

    if let Some(reg) = &report.regimes {
        table(
            dir,
            "regime_summary.csv",
            &["scenario", "regime", "name", "median_days", "median_iv", "median_dummy_auc", "median_improvement", "total_days"],
            reg.summary
                .iter()
                .map(|r| {
                    vec![
                        reg.scenario.to_string(),
                        r.regime.0.to_string(),
                        r.name.clone(),
                        opt(r.median_days),
                        opt(r.median_iv),
                        opt(r.median_dummy_auc),
                        opt(r.median_improvement),
                        r.total_days.to_string(),
                    ]
                })
                .collect(),
        )?;
        table(
            dir,
            "regime_stock.csv",
            &["symbol", "sector", "regime", "name", "days", "mean_iv", "auc", "dummy_auc", "improvement"],
            reg.per_stock
                .iter()
                .map(|r| {
                    vec![
                        r.symbol.clone(),
                        r.sector.clone(),
                        r.regime.0.to_string(),
                        r.regime.name(reg.n_states),
                        r.days.to_string(),
                        opt(r.mean_iv),
                        opt(r.auc),
                        opt(r.dummy_auc),
                        opt(r.improvement),
                    ]
                })
                .collect(),
        )?;
        table(
            dir,
            "regime_sector.csv",
            &["sector", "regime", "name", "n_stocks", "median_improvement"],
            reg.by_sector
                .iter()
                .map(|r| {
                    vec![
                        r.sector.clone(),
                        r.regime.0.to_string(),
                        r.name.clone(),
                        r.n_stocks.to_string(),
                        opt(r.median_improvement),
                    ]
                })
                .collect(),
        )?;
    }

    if let Some(att) = &report.attention {
        let corr = |name: &str, method: &str, c: &crate::eval::stats::Correlation| {
            vec![name.to_string(), method.to_string(), c.n.to_string(), opt(c.r), opt(c.p_value)]
        };
        table(
            dir,
            "correlations.csv",
            &["pair", "method", "n", "r", "p_value"],
            vec![
                corr("liquidity_improvement", "pearson", &att.liquidity_improvement_pearson),
                corr("liquidity_improvement", "spearman", &att.liquidity_improvement_spearman),
                corr("tweets_liquidity", "pearson", &att.tweets_liquidity_pearson),
                corr("tweets_liquidity", "spearman", &att.tweets_liquidity_spearman),
            ],
        )?;
        table(
            dir,
            "attention_stocks.csv",
            &["symbol", "sector", "liquidity", "median_daily_tweets", "improvement"],
            att.stocks
                .iter()
                .map(|s| {
                    vec![
                        s.symbol.clone(),
                        s.sector.clone(),
                        s.liquidity.to_string(),
                        s.median_daily_tweets.to_string(),
                        s.improvement.to_string(),
                    ]
                })
                .collect(),
        )?;
        table(
            dir,
            "attention_sectors.csv",
            &["sector", "n_stocks", "median_liquidity", "median_daily_tweets", "median_improvement"],
            att.sectors
                .iter()
                .map(|s| {
                    vec![
                        s.sector.clone(),
                        s.n_stocks.to_string(),
                        opt(s.median_liquidity),
                        opt(s.median_daily_tweets),
                        opt(s.median_improvement),
                    ]
                })
                .collect(),
        )?;
    }
    Ok(())
}
