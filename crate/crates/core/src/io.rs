//! CSV and JSONL readers and writers with `file:line` diagnostics.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use crate::features::PricePoint;
use crate::hmm::RegimePath;
use crate::ivindex::{IvPoint, OptionChainSnapshot, OptionQuote, Right};
use crate::sentiment::{SessionClock, TweetRecord};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },
    #[error("NoExpiries: {0} contains no option quotes")]
    NoExpiries(String),
}

fn open(path: &Path) -> Result<File, InputError> {
    File::open(path).map_err(|source| InputError::Open { path: path.display().to_string(), source })
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> InputError {
    InputError::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

/// Deserializes every data row of a headed CSV, handing each row and its
/// 1-based line number to `f`.
fn each_row<T, F>(path: &Path, mut f: F) -> Result<(), InputError>
where
    T: DeserializeOwned,
    F: FnMut(T, u64) -> Result<(), String>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        if !more {
            return Ok(());
        }
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let row: T = rec.deserialize(Some(&headers)).map_err(|e| parse_err(path, line, e.to_string()))?;
        f(row, line).map_err(|msg| parse_err(path, line, msg))?;
    }
}

fn finite(name: &str, v: f64) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{name} is not finite"))
    }
}

#[derive(Deserialize)]
struct ChainRow {
    symbol: String,
    asof_date: NaiveDate,
    expiry_date: NaiveDate,
    right: String,
    strike: f64,
    bid: f64,
    ask: f64,
    #[serde(default)]
    volume: Option<f64>,
}

/// Reads `symbol,asof_date,expiry_date,right,strike,bid,ask[,volume]` into
/// one snapshot per (symbol, date), ordered by key. Rates are left at 0.
pub fn read_chains(path: &Path) -> Result<Vec<OptionChainSnapshot>, InputError> {
    let mut snaps: BTreeMap<(String, NaiveDate), Vec<OptionQuote>> = BTreeMap::new();
    each_row(path, |r: ChainRow, _| {
        let right: Right = r.right.parse().map_err(|_| format!("bad option right {:?}", r.right))?;
        finite("strike", r.strike)?;
        finite("bid", r.bid)?;
        finite("ask", r.ask)?;
        if r.strike <= 0.0 {
            return Err(format!("strike {} must be positive", r.strike));
        }
        if r.bid < 0.0 || r.ask < r.bid {
            return Err(format!("bid {} / ask {} are not a valid quote", r.bid, r.ask));
        }
        if r.expiry_date <= r.asof_date {
            return Err(format!("expiry {} is not after {}", r.expiry_date, r.asof_date));
        }
        if let Some(v) = r.volume {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("volume {v} must be non-negative"));
            }
        }
        let q = OptionQuote { volume: r.volume, ..OptionQuote::new(r.expiry_date, r.strike, right, r.bid, r.ask) };
        snaps.entry((r.symbol, r.asof_date)).or_default().push(q);
        Ok(())
    })?;
    if snaps.is_empty() {
        return Err(InputError::NoExpiries(path.display().to_string()));
    }
    Ok(snaps
        .into_iter()
        .map(|((symbol, asof), quotes)| OptionChainSnapshot { symbol, asof, quotes, risk_free_rate: 0.0 })
        .collect())
}

/// Writes quotes in the layout `read_chains` accepts.
pub fn write_chains<W: Write>(w: W, snaps: &[OptionChainSnapshot]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "asof_date", "expiry_date", "right", "strike", "bid", "ask", "volume"])?;
    for s in snaps {
        for q in &s.quotes {
            out.write_record([
                s.symbol.clone(),
                s.asof.to_string(),
                q.expiry.to_string(),
                match q.right {
                    Right::Call => "C".to_string(),
                    Right::Put => "P".to_string(),
                },
                q.strike.to_string(),
                q.bid.to_string(),
                q.ask.to_string(),
                q.volume.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Step curve of annualized continuously compounded rates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RateCurve {
    points: BTreeMap<NaiveDate, f64>,
}

impl RateCurve {
    pub fn new(points: BTreeMap<NaiveDate, f64>) -> Self {
        Self { points }
    }

    /// Latest rate on or before `date`; 0 before the first observation.
    pub fn rate_on(&self, date: NaiveDate) -> f64 {
        self.points.range(..=date).next_back().map_or(0.0, |(_, r)| *r)
    }
}

#[derive(Deserialize)]
struct RateRow {
    date: NaiveDate,
    rate: f64,
}

pub fn read_rates(path: &Path) -> Result<RateCurve, InputError> {
    let mut points = BTreeMap::new();
    each_row(path, |r: RateRow, _| {
        finite("rate", r.rate)?;
        if points.insert(r.date, r.rate).is_some() {
            return Err(format!("duplicate rate for {}", r.date));
        }
        Ok(())
    })?;
    Ok(RateCurve::new(points))
}

#[derive(Deserialize)]
struct PriceRow {
    symbol: String,
    date: NaiveDate,
    adj_close: f64,
}

/// Reads `symbol,date,adj_close`, sorted by date within each symbol.
pub fn read_prices(path: &Path) -> Result<BTreeMap<String, Vec<PricePoint>>, InputError> {
    let mut out: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    each_row(path, |r: PriceRow, _| {
        if !(r.adj_close > 0.0 && r.adj_close.is_finite()) {
            return Err(format!("adj_close {} must be positive", r.adj_close));
        }
        if out.entry(r.symbol.clone()).or_default().insert(r.date, r.adj_close).is_some() {
            return Err(format!("duplicate price for {} on {}", r.symbol, r.date));
        }
        Ok(())
    })?;
    Ok(out
        .into_iter()
        .map(|(s, m)| (s, m.into_iter().map(|(date, adj_close)| PricePoint { date, adj_close }).collect()))
        .collect())
}

pub fn write_prices<W: Write>(w: W, prices: &BTreeMap<String, Vec<PricePoint>>) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "date", "adj_close"])?;
    for (s, pts) in prices {
        for p in pts {
            out.write_record([s.as_str(), &p.date.to_string(), &p.adj_close.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct IvRow {
    symbol: String,
    date: NaiveDate,
    iv: f64,
}

/// Reads `symbol,date,iv`, sorted by date within each symbol.
pub fn read_iv(path: &Path) -> Result<BTreeMap<String, Vec<IvPoint>>, InputError> {
    let mut out: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    each_row(path, |r: IvRow, _| {
        finite("iv", r.iv)?;
        if out.entry(r.symbol.clone()).or_default().insert(r.date, r.iv).is_some() {
            return Err(format!("duplicate iv for {} on {}", r.symbol, r.date));
        }
        Ok(())
    })?;
    Ok(out
        .into_iter()
        .map(|(s, m)| (s, m.into_iter().map(|(date, iv)| IvPoint { date, iv }).collect()))
        .collect())
}

pub fn write_iv<W: Write>(w: W, series: &BTreeMap<String, Vec<IvPoint>>) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "date", "iv"])?;
    for (s, pts) in series {
        for p in pts {
            out.write_record([s.as_str(), &p.date.to_string(), &p.iv.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct LiquidityRow {
    symbol: String,
    liquidity: f64,
}

/// Reads `symbol,liquidity`.
pub fn read_liquidity(path: &Path) -> Result<BTreeMap<String, f64>, InputError> {
    let mut out = BTreeMap::new();
    each_row(path, |r: LiquidityRow, _| {
        finite("liquidity", r.liquidity)?;
        out.insert(r.symbol, r.liquidity);
        Ok(())
    })?;
    Ok(out)
}

#[derive(Deserialize)]
struct TweetJson {
    symbol: String,
    ts: serde_json::Value,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    score: Option<f64>,
}

#[derive(Deserialize)]
struct ScoreRow {
    symbol: String,
    ts: String,
    score: f64,
}

fn ts_string(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Reads tweets from JSONL (`{"symbol","ts","text"}`, optional `score`) or,
/// for `.csv` files, pre-scored `symbol,ts,score` rows.
pub fn read_tweets(path: &Path, clock: &SessionClock) -> Result<Vec<TweetRecord>, InputError> {
    let mut out = Vec::new();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        each_row(path, |r: ScoreRow, _| {
            let rec = TweetRecord {
                timestamp: clock.parse_timestamp(&r.ts).map_err(|e| e.to_string())?,
                symbol: r.symbol,
                text: None,
                precomputed_score: Some(r.score),
            };
            rec.validate().map_err(|e| e.to_string())?;
            out.push(rec);
            Ok(())
        })?;
        return Ok(out);
    }
    let reader = BufReader::new(open(path)?);
    for (i, line) in reader.lines().enumerate() {
        let n = i as u64 + 1;
        let line = line.map_err(|e| parse_err(path, n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: TweetJson = serde_json::from_str(&line).map_err(|e| parse_err(path, n, e.to_string()))?;
        let raw = ts_string(&t.ts).ok_or_else(|| parse_err(path, n, "ts must be a string or number"))?;
        let rec = TweetRecord {
            timestamp: clock.parse_timestamp(&raw).map_err(|e| parse_err(path, n, e.to_string()))?,
            symbol: t.symbol,
            text: t.text,
            precomputed_score: t.score,
        };
        rec.validate().map_err(|e| parse_err(path, n, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes `symbol,date,regime,in_sample` rows with ordinal regime names.
pub fn write_regime_paths<W: Write>(w: W, paths: &BTreeMap<String, RegimePath>) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["symbol", "date", "regime", "in_sample"])?;
    for (symbol, path) in paths {
        for i in 0..path.dates.len() {
            out.write_record([
                symbol.as_str(),
                &path.dates[i].to_string(),
                &path.regimes[i].name(path.n_states),
                if path.in_sample[i] { "true" } else { "false" },
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
