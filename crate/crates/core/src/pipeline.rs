//! End-to-end runs driven by a [`RunConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use thiserror::Error;

use crate::calendar::TradingCalendar;
use crate::config::{ConfigError, RunConfig};
use crate::eval::{
    liquidity_attention_stats, regime_report, run_ablation, stats::attention_rows, AblationSettings, BacktestReport,
    EvalError, StockData,
};
use crate::features::{FeatureError, FeatureMatrix, ScenarioId};
use crate::forest::ForestError;
use crate::hmm::{fit_and_assign, FitOptions, HmmArtifact, HmmError, RegimePath};
use crate::io::{self, InputError};
use crate::ivindex::{dollar_option_volume, iv30, IvError, IvPoint, OptionChainSnapshot};
use crate::sentiment::{aggregate_daily, Lexicon, LexiconScorer, SentimentError};
use crate::synth::SynthError;
use crate::universe::{SectorUniverse, UniverseError};

/// Any failure of a run, classified for process exit codes.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{symbol} {date}: {source}")]
    Iv { symbol: String, date: NaiveDate, source: IvError },
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Universe(#[from] UniverseError),
    #[error("{0} has no sector in the universe file")]
    NoSector(String),
    #[error("{0} has prices but no implied volatility series")]
    MissingIv(String),
    #[error("no stocks to evaluate")]
    NoStocks,
    #[error("{symbol}: {source}")]
    Feature { symbol: String, source: FeatureError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{symbol}: {source}")]
    Hmm { symbol: String, source: HmmError },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("bad report file: {0}")]
    BadReport(String),
    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },
}

/// Process exit code: 2 for bad input, 3 for numeric failures.
impl RunError {
    pub fn exit_code(&self) -> i32 {
        const INPUT: i32 = 2;
        const NUMERIC: i32 = 3;
        match self {
            RunError::Feature { source: FeatureError::NonFinite(..), .. } => NUMERIC,
            RunError::Eval(EvalError::Feature(FeatureError::NonFinite(..))) => NUMERIC,
            RunError::Eval(EvalError::Forest(ForestError::NanFeature)) => NUMERIC,
            RunError::Hmm { source: HmmError::DegenerateModel(_) | HmmError::NonFinite(_), .. } => NUMERIC,
            _ => INPUT,
        }
    }
}

pub(crate) fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Write { path: path.display().to_string(), source }
}

/// Applies each snapshot's date rate and computes the 30-day index.
pub fn iv_from_chains(
    snaps: Vec<OptionChainSnapshot>,
    rates: &io::RateCurve,
) -> Result<BTreeMap<String, Vec<IvPoint>>, RunError> {
    let points: Vec<(String, IvPoint)> = snaps
        .into_par_iter()
        .map(|mut s| {
            s.risk_free_rate = rates.rate_on(s.asof);
            let p = iv30(&s).map_err(|source| RunError::Iv { symbol: s.symbol.clone(), date: s.asof, source })?;
            Ok((s.symbol, p))
        })
        .collect::<Result<_, RunError>>()?;
    let mut out: BTreeMap<String, Vec<IvPoint>> = BTreeMap::new();
    for (sym, p) in points {
        out.entry(sym).or_default().push(p);
    }
    Ok(out)
}

/// Mean daily dollar option volume per symbol.
pub fn liquidity_from_chains(snaps: &[OptionChainSnapshot]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for s in snaps {
        if let Some(v) = dollar_option_volume(s) {
            let e = acc.entry(s.symbol.clone()).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect()
}

/// Reads every input named by the config and assembles per-stock data.
pub fn load_stocks(cfg: &RunConfig) -> Result<Vec<StockData>, RunError> {
    let prices_path = cfg.prices.as_deref().ok_or_else(|| ConfigError::Invalid(vec!["prices: required".into()]))?;
    let mut prices = io::read_prices(prices_path)?;
    if !cfg.symbols.is_empty() {
        let keep: BTreeSet<&String> = cfg.symbols.iter().collect();
        prices.retain(|s, _| keep.contains(s));
    }

    let universe = match &cfg.universe {
        Some(p) => SectorUniverse::from_reader(std::fs::File::open(p).map_err(|source| InputError::Open {
            path: p.display().to_string(),
            source,
        })?)?,
        None => SectorUniverse::bundled(),
    };

    let rates = match &cfg.rates {
        Some(p) => io::read_rates(p)?,
        None => io::RateCurve::default(),
    };
    let chains = match &cfg.chains {
        Some(p) => Some(io::read_chains(p)?),
        None => None,
    };
    let iv = match (&cfg.iv, &chains) {
        (Some(p), _) => io::read_iv(p)?,
        (None, Some(c)) => iv_from_chains(c.clone(), &rates)?,
        (None, None) => return Err(ConfigError::Invalid(vec!["one of iv or chains must be set".into()]).into()),
    };
    let liquidity = match (&cfg.liquidity, &chains) {
        (Some(p), _) => io::read_liquidity(p)?,
        (None, Some(c)) => liquidity_from_chains(c),
        (None, None) => BTreeMap::new(),
    };

    let mut tweets_by_symbol: BTreeMap<String, Vec<_>> = BTreeMap::new();
    if let Some(p) = &cfg.tweets {
        for rec in io::read_tweets(p, &cfg.clock())? {
            if universe.sector_of(&rec.symbol).is_none() {
                return Err(SentimentError::UnknownSymbol(rec.symbol).into());
            }
            tweets_by_symbol.entry(rec.symbol.clone()).or_default().push(rec);
        }
    }
    let lexicon = match &cfg.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::bundled(),
    };
    let scorer = LexiconScorer::new(lexicon);
    let clock = cfg.clock();

    let mut stocks = Vec::with_capacity(prices.len());
    for (symbol, px) in prices {
        let sector = universe.sector_of(&symbol).ok_or_else(|| RunError::NoSector(symbol.clone()))?.to_string();
        let series = iv.get(&symbol).cloned().ok_or_else(|| RunError::MissingIv(symbol.clone()))?;
        let calendar = TradingCalendar::new(px.iter().map(|p| p.date).collect());
        let social = if cfg.tweets.is_some() {
            let recs = tweets_by_symbol.remove(&symbol).unwrap_or_default();
            let one = BTreeSet::from([symbol.clone()]);
            aggregate_daily(&recs, &calendar, &one, &clock, &scorer)?.remove(&symbol).unwrap_or_default()
        } else {
            Vec::new()
        };
        stocks.push(StockData { liquidity: liquidity.get(&symbol).copied(), symbol, sector, prices: px, iv: series, social });
    }
    if stocks.is_empty() {
        return Err(RunError::NoStocks);
    }
    Ok(stocks)
}

/// Builds every requested feature matrix, keyed by (symbol, scenario).
pub fn feature_matrices(
    stocks: &[StockData],
    scenarios: &[ScenarioId],
) -> Result<BTreeMap<(String, ScenarioId), FeatureMatrix>, RunError> {
    let mut out = BTreeMap::new();
    for s in stocks {
        for &sc in scenarios {
            let m = crate::features::build_matrix(&s.prices, &s.iv, &s.social, sc)
                .map_err(|source| RunError::Feature { symbol: s.symbol.clone(), source })?;
            out.insert((s.symbol.clone(), sc), m);
        }
    }
    Ok(out)
}

/// Fitted regime model and decoded path per stock.
pub type RegimeFits = BTreeMap<String, (HmmArtifact, RegimePath)>;

/// Fits one HMM per stock on IV up to `train_end` (per stock) and decodes
/// the whole series.
pub fn fit_regimes(
    stocks: &[StockData],
    train_end: &BTreeMap<String, NaiveDate>,
    opts: &FitOptions,
) -> Result<RegimeFits, RunError> {
    stocks
        .par_iter()
        .map(|s| {
            let dates: Vec<NaiveDate> = s.iv.iter().map(|p| p.date).collect();
            let values: Vec<f64> = s.iv.iter().map(|p| p.iv).collect();
            let end = train_end.get(&s.symbol).copied().unwrap_or(*dates.last().ok_or(RunError::MissingIv(s.symbol.clone()))?);
            let fit = fit_and_assign(&s.symbol, &dates, &values, end, opts)
                .map_err(|source| RunError::Hmm { symbol: s.symbol.clone(), source })?;
            Ok((s.symbol.clone(), fit))
        })
        .collect()
}

/// Everything a backtest produces.
#[derive(Debug, Clone)]
pub struct BacktestRun {
    pub report: BacktestReport,
    pub regimes: RegimeFits,
}

/// Ablation, regime rollup and liquidity/attention statistics.
pub fn backtest(cfg: &RunConfig, stocks: &[StockData]) -> Result<BacktestRun, RunError> {
    let settings = AblationSettings { scenarios: cfg.scenario_ids(), grid: cfg.grid(), plan: cfg.plan(), seed: cfg.seed };
    let mut report = run_ablation(stocks, &settings)?;

    let mut regimes = RegimeFits::new();
    if cfg.regimes {
        let scenario = ScenarioId::new(cfg.regime_scenario).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
        let train_end: BTreeMap<String, NaiveDate> = report
            .stocks
            .iter()
            .filter_map(|s| {
                let end = cfg.hmm_train_end.or_else(|| s.scenarios.first()?.folds.first().map(|f| f.train_end))?;
                Some((s.symbol.clone(), end))
            })
            .collect();
        regimes = fit_regimes(stocks, &train_end, &cfg.hmm_options())?;
        let paths: BTreeMap<String, RegimePath> = regimes.iter().map(|(k, (_, p))| (k.clone(), p.clone())).collect();
        report.regimes = Some(regime_report(&report, &paths, scenario)?);
    }

    if let Ok(scenario) = ScenarioId::new(cfg.attention_scenario) {
        let rows = attention_rows(&report, scenario);
        if rows.len() >= 3 {
            report.attention = Some(liquidity_attention_stats(scenario, rows)?);
        }
    }
    Ok(BacktestRun { report, regimes })
}
