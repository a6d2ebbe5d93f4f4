//! Daily feature rows and next-day IV direction targets.
//!
//! Each raw source series (adjusted close, IV, tweet count, mean polarity)
//! contributes its first difference and its deviation from a 10-day EMA; IV
//! and the two tweet series also contribute their level. The adjusted close
//! level is never a feature.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ivindex::IvPoint;
use crate::sentiment::DailySocialStats;

pub const EMA_SPAN: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("series too short: need at least {need} points, got {got}")]
    SeriesTooShort { need: usize, got: usize },
    #[error("CalendarMismatch: {series} series has no value for trading day {date}")]
    CalendarMismatch { series: Source, date: NaiveDate },
    #[error("unknown scenario {0}; valid ids are 1..=7")]
    UnknownScenario(u8),
    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),
    #[error("non-finite {0} value on {1}")]
    NonFinite(Source, NaiveDate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Price,
    Iv,
    Tweets,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Price => "price",
            Source::Iv => "iv",
            Source::Tweets => "tweets",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    PriceDiff,
    PriceEmaDev,
    IvLevel,
    IvDiff,
    IvEmaDev,
    TweetCount,
    CountDiff,
    CountEmaDev,
    Polarity,
    PolarityDiff,
    PolarityEmaDev,
}

impl Feature {
    pub const ALL: [Feature; 11] = [
        Feature::PriceDiff,
        Feature::PriceEmaDev,
        Feature::IvLevel,
        Feature::IvDiff,
        Feature::IvEmaDev,
        Feature::TweetCount,
        Feature::CountDiff,
        Feature::CountEmaDev,
        Feature::Polarity,
        Feature::PolarityDiff,
        Feature::PolarityEmaDev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::PriceDiff => "price_diff",
            Feature::PriceEmaDev => "price_ema_dev",
            Feature::IvLevel => "iv_level",
            Feature::IvDiff => "iv_diff",
            Feature::IvEmaDev => "iv_ema_dev",
            Feature::TweetCount => "tweet_count",
            Feature::CountDiff => "count_diff",
            Feature::CountEmaDev => "count_ema_dev",
            Feature::Polarity => "polarity",
            Feature::PolarityDiff => "polarity_diff",
            Feature::PolarityEmaDev => "polarity_ema_dev",
        }
    }

    pub fn source(self) -> Source {
        match self {
            Feature::PriceDiff | Feature::PriceEmaDev => Source::Price,
            Feature::IvLevel | Feature::IvDiff | Feature::IvEmaDev => Source::Iv,
            _ => Source::Tweets,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Feature {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FeatureError::UnknownFeature(s.to_string()))
    }
}

/// One of the seven ablation scenarios (feature-source combinations).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ScenarioId(u8);

impl ScenarioId {
    pub fn new(id: u8) -> Result<Self, FeatureError> {
        if (1..=7).contains(&id) {
            Ok(Self(id))
        } else {
            Err(FeatureError::UnknownScenario(id))
        }
    }

    pub fn all() -> Vec<ScenarioId> {
        (1..=7).map(ScenarioId).collect()
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn sources(self) -> &'static [Source] {
        use Source::*;
        match self.0 {
            1 => &[Price],
            2 => &[Price, Tweets],
            3 => &[Iv],
            4 => &[Iv, Tweets],
            5 => &[Tweets],
            6 => &[Price, Iv],
            7 => &[Price, Iv, Tweets],
            _ => unreachable!("validated on construction"),
        }
    }

    pub fn uses(self, source: Source) -> bool {
        self.sources().contains(&source)
    }

    /// Columns in canonical order.
    pub fn features(self) -> Vec<Feature> {
        Feature::ALL.into_iter().filter(|f| self.uses(f.source())).collect()
    }

    pub fn label(self) -> String {
        let names: Vec<&str> = self
            .sources()
            .iter()
            .map(|s| match s {
                Source::Price => "Stock Price",
                Source::Iv => "Implied Volatility",
                Source::Tweets => "Tweets",
            })
            .collect();
        names.join(", ")
    }
}

impl TryFrom<u8> for ScenarioId {
    type Error = FeatureError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        ScenarioId::new(v)
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        s.0
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub adj_close: f64,
}

/// Recursive EMA with α = 2/(span+1), seeded with the first observation.
pub fn ema(series: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(series.len());
    let mut state = match series.first() {
        Some(&x) => x,
        None => return out,
    };
    out.push(state);
    for &x in &series[1..] {
        state += alpha * (x - state);
        out.push(state);
    }
    out
}

/// `out[t] = in[t+1] - in[t]`, aligned to the later observation.
pub fn first_diff(series: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if series.len() < 2 {
        return Err(FeatureError::SeriesTooShort { need: 2, got: series.len() });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// `y_t = 1` iff the next value is strictly larger. One shorter than the input.
pub fn label_targets(iv: &[f64]) -> Vec<u8> {
    iv.windows(2).map(|w| u8::from(w[1] - w[0] > 0.0)).collect()
}

/// Temporally ordered design matrix for one stock and scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub scenario: ScenarioId,
    pub columns: Vec<Feature>,
    pub dates: Vec<NaiveDate>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<u8>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, feature: Feature) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|&c| c == feature)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|c| c.name().to_string()));
        header.push("target".into());
        out.write_record(&header)?;
        for ((date, row), y) in self.dates.iter().zip(&self.rows).zip(&self.targets) {
            let mut rec = vec![date.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            rec.push(y.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Raw {
    Price,
    Iv,
    Count,
    Polarity,
}

struct Derived {
    level: Vec<f64>,
    diff: Vec<f64>,
    ema_dev: Vec<f64>,
}

impl Derived {
    fn of(level: Vec<f64>) -> Self {
        let mut diff = vec![f64::NAN];
        diff.extend(level.windows(2).map(|w| w[1] - w[0]));
        let ema_dev = level.iter().zip(ema(&level, EMA_SPAN)).map(|(x, e)| x - e).collect();
        Self { level, diff, ema_dev }
    }
}

fn align<T: Copy>(
    calendar: &[NaiveDate],
    values: impl IntoIterator<Item = (NaiveDate, T)>,
    source: Source,
) -> Result<Vec<T>, FeatureError> {
    let map: HashMap<NaiveDate, T> = values.into_iter().collect();
    calendar
        .iter()
        .map(|d| map.get(d).copied().ok_or(FeatureError::CalendarMismatch { series: source, date: *d }))
        .collect()
}

/// Builds the labeled matrix for `scenario`.
///
/// The price series defines the trading calendar; IV and social values on
/// other dates are ignored. The first day (no difference yet) and the last
/// day (no next-day label) are dropped, so row `t` uses data up to and
/// including day `t` and its target compares days `t` and `t + 1`.
pub fn build_matrix(
    prices: &[PricePoint],
    iv: &[IvPoint],
    social: &[DailySocialStats],
    scenario: ScenarioId,
) -> Result<FeatureMatrix, FeatureError> {
    let mut prices = prices.to_vec();
    prices.sort_by_key(|p| p.date);
    prices.dedup_by_key(|p| p.date);
    let calendar: Vec<NaiveDate> = prices.iter().map(|p| p.date).collect();
    if calendar.len() < 3 {
        return Err(FeatureError::SeriesTooShort { need: 3, got: calendar.len() });
    }

    let check = |xs: &[f64], source: Source| -> Result<(), FeatureError> {
        match xs.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(FeatureError::NonFinite(source, calendar[i])),
            None => Ok(()),
        }
    };

    let iv_level = align(&calendar, iv.iter().map(|p| (p.date, p.iv)), Source::Iv)?;
    check(&iv_level, Source::Iv)?;
    let targets = label_targets(&iv_level);

    let mut derived: HashMap<Raw, Derived> = HashMap::new();
    for &source in scenario.sources() {
        match source {
            Source::Price => {
                let level: Vec<f64> = prices.iter().map(|p| p.adj_close).collect();
                check(&level, source)?;
                derived.insert(Raw::Price, Derived::of(level));
            }
            Source::Iv => {
                derived.insert(Raw::Iv, Derived::of(iv_level.clone()));
            }
            Source::Tweets => {
                let counts = align(&calendar, social.iter().map(|s| (s.date, s.tweet_count as f64)), source)?;
                let pol = align(&calendar, social.iter().map(|s| (s.date, s.mean_polarity)), source)?;
                check(&pol, source)?;
                derived.insert(Raw::Count, Derived::of(counts));
                derived.insert(Raw::Polarity, Derived::of(pol));
            }
        }
    }

    let columns = scenario.features();
    let n = calendar.len();
    let mut rows = Vec::with_capacity(n - 2);
    for t in 1..n - 1 {
        let row: Vec<f64> = columns.iter().map(|&f| feature_value(&derived, f, t)).collect();
        rows.push(row);
    }
    Ok(FeatureMatrix {
        scenario,
        columns,
        dates: calendar[1..n - 1].to_vec(),
        rows,
        targets: targets[1..].to_vec(),
    })
}

fn feature_value(derived: &HashMap<Raw, Derived>, f: Feature, t: usize) -> f64 {
    let d = |r: Raw| &derived[&r];
    match f {
        Feature::PriceDiff => d(Raw::Price).diff[t],
        Feature::PriceEmaDev => d(Raw::Price).ema_dev[t],
        Feature::IvLevel => d(Raw::Iv).level[t],
        Feature::IvDiff => d(Raw::Iv).diff[t],
        Feature::IvEmaDev => d(Raw::Iv).ema_dev[t],
        Feature::TweetCount => d(Raw::Count).level[t],
        Feature::CountDiff => d(Raw::Count).diff[t],
        Feature::CountEmaDev => d(Raw::Count).ema_dev[t],
        Feature::Polarity => d(Raw::Polarity).level[t],
        Feature::PolarityDiff => d(Raw::Polarity).diff[t],
        Feature::PolarityEmaDev => d(Raw::Polarity).ema_dev[t],
    }
}
