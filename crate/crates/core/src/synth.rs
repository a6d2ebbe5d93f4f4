//! Synthetic data bundles with known ground truth.
//!
//! Each stock has a hidden regime chain driving its IV level. The direction
//! of every IV move is a coin flip; with `signal_strength` s > 0 (in the
//! regimes listed in `signal_regimes`) the coin is biased towards repeating
//! the previous move, P(same) = (1 + s) / 2. Mean reversion towards the
//! regime mean acts only on move sizes, so with s = 0 the labels are
//! independent of every feature.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::calendar::TradingCalendar;
use crate::eval::StockData;
use crate::features::PricePoint;
use crate::ivindex::{IvPoint, OptionChainSnapshot, OptionQuote, Right, DAYS_PER_YEAR, HORIZON_DAYS};
use crate::sentiment::{aggregate_daily, Lexicon, LexiconScorer, SentimentError, SessionClock, TweetRecord};
use crate::universe::SECTORS;

/// Reference IV regime means, low to very high.
pub const REFERENCE_REGIME_MEANS: [f64; 4] = [18.6, 22.3, 26.7, 35.3];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_stocks: usize,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub seed: u64,
    pub regime_means: Vec<f64>,
    /// Within-regime IV dispersion; also sets the daily move size.
    pub regime_stds: Vec<f64>,
    /// Self-transition probability; ignored when `transition` is given.
    pub persistence: f64,
    pub transition: Option<Vec<Vec<f64>>>,
    /// Daily IV move size as a multiple of the regime std.
    pub move_scale: f64,
    /// Strength of the pull towards the regime mean, in [0, 1).
    pub reversion: f64,
    pub signal_strength: f64,
    /// Regimes in which the signal is active; empty means all.
    pub signal_regimes: Vec<usize>,
    /// Median expected tweets per stock and day.
    pub tweet_intensity: f64,
    /// Probability shift of tweet polarity against the next IV move.
    pub tweet_coupling: f64,
    pub price_vol: f64,
    pub price_drift: f64,
    pub rate: f64,
    pub with_chains: bool,
    pub chain_strikes: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_stocks: 11,
            n_days: 1000,
            start_date: NaiveDate::from_ymd_opt(2014, 1, 2).expect("valid date"),
            seed: 42,
            regime_means: REFERENCE_REGIME_MEANS.to_vec(),
            regime_stds: vec![1.2, 1.4, 1.8, 3.0],
            persistence: 0.98,
            transition: None,
            move_scale: 0.5,
            reversion: 0.5,
            signal_strength: 0.3,
            signal_regimes: Vec::new(),
            tweet_intensity: 20.0,
            tweet_coupling: 0.0,
            price_vol: 0.25,
            price_drift: 0.05,
            rate: 0.02,
            with_chains: false,
            chain_strikes: 41,
        }
    }
}

impl SyntheticSpec {
    pub fn n_states(&self) -> usize {
        self.regime_means.len()
    }

    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        if let Some(t) = &self.transition {
            return t.clone();
        }
        let k = self.n_states();
        let off = if k > 1 { (1.0 - self.persistence) / (k - 1) as f64 } else { 0.0 };
        (0..k).map(|i| (0..k).map(|j| if i == j { self.persistence } else { off }).collect()).collect()
    }

    /// Every problem with the spec, not just the first.
    pub fn validate(&self) -> Result<(), SynthError> {
        let mut errs = Vec::new();
        let k = self.n_states();
        if self.n_stocks == 0 {
            errs.push("n_stocks must be positive".to_string());
        }
        if self.n_days < 3 {
            errs.push("n_days must be at least 3".to_string());
        }
        if k == 0 {
            errs.push("regime_means must not be empty".to_string());
        }
        if self.regime_means.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            errs.push("regime_means must be positive".to_string());
        }
        if self.regime_stds.len() != k {
            errs.push(format!("regime_stds has {} entries, expected {k}", self.regime_stds.len()));
        }
        if self.regime_stds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            errs.push("regime_stds must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.persistence) {
            errs.push("persistence must lie in [0, 1]".to_string());
        }
        if let Some(t) = &self.transition {
            let square = t.len() == k && t.iter().all(|r| r.len() == k);
            let stochastic = t.iter().all(|r| r.iter().all(|p| *p >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if !square || !stochastic {
                errs.push(format!("transition must be a row-stochastic {k}x{k} matrix"));
            }
        }
        if !(self.move_scale > 0.0) {
            errs.push("move_scale must be positive".to_string());
        }
        if !(0.0..1.0).contains(&self.reversion) {
            errs.push("reversion must lie in [0, 1)".to_string());
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            errs.push("signal_strength must lie in [0, 1]".to_string());
        }
        if let Some(r) = self.signal_regimes.iter().find(|r| **r >= k.max(1)) {
            errs.push(format!("signal_regimes entry {r} is not a regime"));
        }
        if !(self.tweet_intensity >= 0.0) {
            errs.push("tweet_intensity must be non-negative".to_string());
        }
        if !(0.0..=1.0).contains(&self.tweet_coupling) {
            errs.push("tweet_coupling must lie in [0, 1]".to_string());
        }
        if !(self.price_vol > 0.0) {
            errs.push("price_vol must be positive".to_string());
        }
        if !self.rate.is_finite() {
            errs.push("rate must be finite".to_string());
        }
        if self.chain_strikes < 5 {
            errs.push("chain_strikes must be at least 5".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SynthError::Invalid(errs))
        }
    }

    fn signal_active(&self, regime: usize) -> bool {
        self.signal_strength > 0.0 && (self.signal_regimes.is_empty() || self.signal_regimes.contains(&regime))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStock {
    pub symbol: String,
    pub sector: String,
    /// Latent attention driving tweet volume and option liquidity.
    pub attention: f64,
    pub liquidity: f64,
    pub prices: Vec<PricePoint>,
    pub iv: Vec<IvPoint>,
    pub regimes: Vec<usize>,
    /// Whether the next IV move on that day was drawn with the signal on.
    pub signal: Vec<bool>,
    pub tweets: Vec<TweetRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub spec: SyntheticSpec,
    pub calendar: TradingCalendar,
    pub stocks: Vec<SyntheticStock>,
}

/// Consecutive weekdays starting on or after `start`.
pub fn weekday_calendar(start: NaiveDate, n: usize) -> TradingCalendar {
    let days = start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect();
    TradingCalendar::new(days)
}

fn draw_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

const FILLERS: [&str; 12] = [
    "stock", "today", "price", "market", "options", "chart", "watching", "earnings", "volume", "trade", "shares", "week",
];

fn tweet_text<R: Rng>(symbol: &str, sign: i8, words: &(Vec<&str>, Vec<&str>), rng: &mut R) -> String {
    let filler = |rng: &mut R| *FILLERS.choose(rng).expect("fillers");
    let mut parts = vec![format!("${symbol}"), filler(rng).to_string()];
    let pool = match sign {
        1 => Some(&words.0),
        -1 => Some(&words.1),
        _ => None,
    };
    if let Some(w) = pool.and_then(|p| p.choose(rng)) {
        parts.push((*w).to_string());
    }
    parts.push(filler(rng).to_string());
    parts.join(" ")
}

/// Generates the whole bundle in memory. Output depends only on the spec.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticBundle, SynthError> {
    spec.validate()?;
    let calendar = weekday_calendar(spec.start_date, spec.n_days);
    let lexicon = Lexicon::bundled();
    let (pos, neg) = lexicon.tokens_by_sign();
    let words = (
        pos.iter().filter(|(t, _)| !t.contains('\'')).map(|(t, _)| *t).collect::<Vec<_>>(),
        neg.iter().filter(|(t, _)| !t.contains('\'')).map(|(t, _)| *t).collect::<Vec<_>>(),
    );
    let trans = spec.transition_matrix();
    let k = spec.n_states();
    let close = NaiveTime::from_hms_opt(16, 0, 0).expect("valid time");

    let stocks = (0..spec.n_stocks)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let symbol = format!("SYN{:03}", i + 1);
            let sector = SECTORS[i % SECTORS.len()].to_string();
            let attention: f64 = (0.75 * rng.sample::<f64, _>(StandardNormal)).exp();
            let liquidity = 1.0e6 * attention * (0.5 * rng.sample::<f64, _>(StandardNormal)).exp();

            // regimes
            let mut regimes = Vec::with_capacity(spec.n_days);
            let mut r = rng.random_range(0..k);
            for _ in 0..spec.n_days {
                regimes.push(r);
                r = draw_index(&trans[r], &mut rng);
            }

            // IV
            let mut iv = Vec::with_capacity(spec.n_days);
            let mut signal = Vec::with_capacity(spec.n_days);
            let mut level = spec.regime_means[regimes[0]];
            let mut last_dir = 0.0f64;
            for t in 0..spec.n_days {
                iv.push(level);
                let active = spec.signal_active(regimes[t]) && last_dir != 0.0;
                signal.push(active);
                let p_up = if active { 0.5 + 0.5 * spec.signal_strength * last_dir } else { 0.5 };
                let up = rng.random::<f64>() < p_up;
                let target = regimes[(t + 1).min(spec.n_days - 1)];
                let sd = spec.regime_stds[target];
                let c = spec.reversion * ((level - spec.regime_means[target]) / sd).tanh();
                let b = spec.move_scale * sd;
                let step = if up { b * (1.0 - c) } else { -b * (1.0 + c) };
                level = (level + step).max(1.0);
                last_dir = if up { 1.0 } else { -1.0 };
            }

            // prices
            let dt = 1.0 / 252.0;
            let mut s = 50.0 + 150.0 * rng.random::<f64>();
            let prices = calendar
                .days()
                .iter()
                .map(|&date| {
                    let p = PricePoint { date, adj_close: s };
                    let z: f64 = rng.sample(StandardNormal);
                    s *= ((spec.price_drift - 0.5 * spec.price_vol.powi(2)) * dt + spec.price_vol * dt.sqrt() * z).exp();
                    p
                })
                .collect::<Vec<_>>();

            // tweets: day t's session runs from the previous 16:00 to 16:00
            let mut tweets = Vec::new();
            let lambda = spec.tweet_intensity * attention;
            if lambda > 0.0 {
                let poisson = Poisson::new(lambda).expect("positive rate");
                for (t, &date) in calendar.days().iter().enumerate() {
                    let n = poisson.sample(&mut rng) as usize;
                    let next_up = t + 1 < spec.n_days && iv[t + 1] > iv[t];
                    for _ in 0..n {
                        let minutes_before = rng.random_range(1..=24 * 60);
                        let ts = NaiveDateTime::new(date, close) - Duration::minutes(minutes_before);
                        let sign: i8 = if rng.random::<f64>() < 0.3 {
                            0
                        } else {
                            let p_neg = 0.5 + 0.5 * spec.tweet_coupling * if next_up { 1.0 } else { -1.0 };
                            if rng.random::<f64>() < p_neg { -1 } else { 1 }
                        };
                        tweets.push(TweetRecord {
                            symbol: symbol.clone(),
                            timestamp: ts,
                            text: Some(tweet_text(&symbol, sign, &words, &mut rng)),
                            precomputed_score: None,
                        });
                    }
                }
            }

            SyntheticStock {
                iv: calendar.days().iter().zip(&iv).map(|(&date, &iv)| IvPoint { date, iv }).collect(),
                symbol,
                sector,
                attention,
                liquidity,
                prices,
                regimes,
                signal,
                tweets,
            }
        })
        .collect();

    Ok(SyntheticBundle { spec: spec.clone(), calendar, stocks })
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Black-Scholes price of a European option without dividends.
pub fn black_scholes(right: Right, spot: f64, strike: f64, rate: f64, vol: f64, t: f64) -> f64 {
    let sd = vol * t.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * t) / sd;
    let d2 = d1 - sd;
    let df = (-rate * t).exp();
    match right {
        Right::Call => spot * norm_cdf(d1) - strike * df * norm_cdf(d2),
        Right::Put => strike * df * norm_cdf(-d2) - spot * norm_cdf(-d1),
    }
}

fn round_to(x: f64, places: i32) -> f64 {
    let m = 10f64.powi(places);
    (x * m).round() / m
}

/// The two Friday expiries straddling 30 days: the last one at or inside
/// the horizon and the one a week later.
pub fn straddling_fridays(asof: NaiveDate) -> (NaiveDate, NaiveDate) {
    let mut near = asof + Duration::days(HORIZON_DAYS);
    while near.weekday() != Weekday::Fri {
        near -= Duration::days(1);
    }
    (near, near + Duration::days(7))
}

impl SyntheticBundle {
    /// Option chain on trading day `day` priced at the stock's IV under a
    /// flat volatility. Volumes are scaled so the dollar volume of the
    /// snapshot equals the stock's liquidity.
    pub fn chain(&self, stock: usize, day: usize) -> OptionChainSnapshot {
        let st = &self.stocks[stock];
        let asof = self.calendar.days()[day];
        let spot = st.prices[day].adj_close;
        let vol = st.iv[day].iv / 100.0;
        let rate = self.spec.rate;
        let (near, next) = straddling_fridays(asof);
        let t_next = (next - asof).num_days() as f64 / DAYS_PER_YEAR;
        let dk = round_to(spot * vol * t_next.sqrt() * 0.25, 2).max(0.01);
        let half = (self.spec.chain_strikes / 2) as i64;
        let centre = (spot / dk).round() as i64;

        let mut quotes = Vec::new();
        for expiry in [near, next] {
            let t = (expiry - asof).num_days() as f64 / DAYS_PER_YEAR;
            for j in (centre - half)..=(centre + half) {
                let strike = round_to(j as f64 * dk, 2);
                if strike <= 0.0 {
                    continue;
                }
                for right in [Right::Call, Right::Put] {
                    let mid = black_scholes(right, spot, strike, rate, vol, t);
                    let (bid, ask) = if mid < 0.005 {
                        (0.0, 0.01)
                    } else {
                        (round_to(mid * 0.98, 4), round_to(mid * 1.02, 4))
                    };
                    let z = (strike / spot).ln() / (vol * t.sqrt());
                    quotes.push(OptionQuote { volume: Some((-0.5 * z * z).exp()), ..OptionQuote::new(expiry, strike, right, bid, ask) });
                }
            }
        }
        let dollar: f64 = quotes.iter().map(|q| q.volume.unwrap_or(0.0) * q.mid() * 100.0).sum();
        let scale = if dollar > 0.0 { st.liquidity / dollar } else { 0.0 };
        for q in &mut quotes {
            q.volume = q.volume.map(|v| (v * scale).round());
        }
        OptionChainSnapshot { symbol: st.symbol.clone(), asof, quotes, risk_free_rate: rate }
    }

    /// Scores tweets with the bundled lexicon and assembles per-stock inputs.
    pub fn stock_data(&self) -> Result<Vec<StockData>, SynthError> {
        let universe: BTreeSet<String> = self.stocks.iter().map(|s| s.symbol.clone()).collect();
        let tweets: Vec<TweetRecord> = self.stocks.iter().flat_map(|s| s.tweets.iter().cloned()).collect();
        let scorer = LexiconScorer::new(Lexicon::bundled());
        let mut social = aggregate_daily(&tweets, &self.calendar, &universe, &SessionClock::default(), &scorer)?;
        Ok(self
            .stocks
            .iter()
            .map(|s| StockData {
                symbol: s.symbol.clone(),
                sector: s.sector.clone(),
                prices: s.prices.clone(),
                iv: s.iv.clone(),
                social: social.remove(&s.symbol).unwrap_or_default(),
                liquidity: Some(s.liquidity),
            })
            .collect())
    }

    /// Writes the bundle plus a ready-to-run `config.toml` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| fs::File::create(dir.join(name)).map(BufWriter::new);

        let prices: BTreeMap<String, Vec<PricePoint>> =
            self.stocks.iter().map(|s| (s.symbol.clone(), s.prices.clone())).collect();
        crate::io::write_prices(create("prices.csv")?, &prices)?;
        let iv: BTreeMap<String, Vec<IvPoint>> = self.stocks.iter().map(|s| (s.symbol.clone(), s.iv.clone())).collect();
        crate::io::write_iv(create("iv.csv")?, &iv)?;

        let mut w = csv::Writer::from_writer(create("rates.csv")?);
        w.write_record(["date", "rate"])?;
        w.write_record([self.spec.start_date.to_string(), self.spec.rate.to_string()])?;
        w.flush()?;

        let mut w = csv::Writer::from_writer(create("liquidity.csv")?);
        w.write_record(["symbol", "liquidity"])?;
        for s in &self.stocks {
            w.write_record([s.symbol.clone(), s.liquidity.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(create("universe.csv")?);
        w.write_record(["ticker", "sector"])?;
        for s in &self.stocks {
            w.write_record([&s.symbol, &s.sector])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(create("regimes_truth.csv")?);
        w.write_record(["symbol", "date", "regime", "signal"])?;
        for s in &self.stocks {
            for (t, d) in self.calendar.days().iter().enumerate() {
                w.write_record([s.symbol.clone(), d.to_string(), s.regimes[t].to_string(), s.signal[t].to_string()])?;
            }
        }
        w.flush()?;

        {
            use std::io::Write;
            let mut f = create("tweets.jsonl")?;
            for s in &self.stocks {
                for t in &s.tweets {
                    let line = serde_json::json!({
                        "symbol": t.symbol,
                        "ts": t.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
                        "text": t.text,
                    });
                    writeln!(f, "{line}")?;
                }
            }
            f.flush()?;
        }

        if self.spec.with_chains {
            let mut f = create("chains.csv")?;
            let snaps: Vec<OptionChainSnapshot> = (0..self.stocks.len())
                .flat_map(|i| (0..self.calendar.len()).map(move |d| (i, d)))
                .map(|(i, d)| self.chain(i, d))
                .collect();
            crate::io::write_chains(&mut f, &snaps)?;
        }

        let truth = serde_json::json!({
            "spec": self.spec,
            "transition": self.spec.transition_matrix(),
            "stocks": self.stocks.iter().map(|s| serde_json::json!({
                "symbol": s.symbol,
                "sector": s.sector,
                "attention": s.attention,
                "liquidity": s.liquidity,
                "n_tweets": s.tweets.len(),
            })).collect::<Vec<_>>(),
        });
        fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth)? + "\n")?;
        fs::write(dir.join("spec.toml"), toml::to_string(&self.spec).map_err(std::io::Error::other)?)?;
        fs::write(dir.join("config.toml"), self.default_config())?;
        Ok(())
    }

    fn default_config(&self) -> String {
        let mut s = String::from(
            "prices = \"prices.csv\"\n\
             iv = \"iv.csv\"\n\
             rates = \"rates.csv\"\n\
             tweets = \"tweets.jsonl\"\n\
             liquidity = \"liquidity.csv\"\n\
             universe = \"universe.csv\"\n\
             out = \"report\"\n",
        );
        if self.spec.with_chains {
            s.push_str("chains = \"chains.csv\"\n");
        }
        s.push_str(&format!("seed = {}\n", self.spec.seed));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ivindex::iv30;

    fn small() -> SyntheticSpec {
        SyntheticSpec { n_stocks: 2, n_days: 120, ..Default::default() }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = generate(&small()).unwrap();
        assert_eq!(a.stocks, generate(&small()).unwrap().stocks);
        let b = generate(&SyntheticSpec { seed: 7, ..small() }).unwrap();
        assert_ne!(a.stocks[0].iv, b.stocks[0].iv);
    }

    #[test]
    fn shapes() {
        let b = generate(&small()).unwrap();
        assert_eq!(b.calendar.len(), 120);
        for s in &b.stocks {
            assert_eq!(s.iv.len(), 120);
            assert_eq!(s.prices.len(), 120);
            assert!(s.iv.iter().all(|p| p.iv >= 1.0));
            assert!(!s.tweets.is_empty());
        }
        assert!(b.calendar.days().iter().all(|d| d.weekday().num_days_from_monday() < 5));
    }

    #[test]
    fn invalid_fields_are_all_reported() {
        let bad = SyntheticSpec { n_stocks: 0, reversion: 1.5, regime_stds: vec![1.0], ..Default::default() };
        match bad.validate() {
            Err(SynthError::Invalid(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn put_call_parity() {
        let (s, k, r, v, t) = (100.0, 95.0, 0.03, 0.25, 0.1);
        let c = black_scholes(Right::Call, s, k, r, v, t);
        let p = black_scholes(Right::Put, s, k, r, v, t);
        assert!((c - p - (s - k * (-r * t).exp())).abs() < 1e-10);
    }

    #[test]
    fn chains_invert_to_generator_iv() {
        let b = generate(&SyntheticSpec { n_stocks: 1, n_days: 60, ..Default::default() }).unwrap();
        for day in [0, 17, 59] {
            let snap = b.chain(0, day);
            let got = iv30(&snap).unwrap().iv;
            let want = b.stocks[0].iv[day].iv;
            assert!((got - want).abs() < 0.5, "day {day}: {got} vs {want}");
        }
    }

    #[test]
    fn expiries_straddle_horizon() {
        for offset in 0..14 {
            let asof = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap() + Duration::days(offset);
            let (near, next) = straddling_fridays(asof);
            assert!((near - asof).num_days() <= 30 && (next - asof).num_days() > 30);
        }
    }
}
