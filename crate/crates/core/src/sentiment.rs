//! Tweet polarity scoring and daily aggregation per symbol.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::TradingCalendar;

/// Normalization constant: s = v / sqrt(v² + ALPHA).
pub const ALPHA: f64 = 15.0;
/// Number of preceding tokens inspected for a negator.
pub const NEGATION_WINDOW: usize = 3;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.tsv");

const NEGATORS: &[&str] = &[
    "not", "no", "never", "none", "nope", "nor", "nothing", "nowhere", "neither", "without",
    "cannot", "cant", "dont", "doesnt", "didnt", "isnt", "arent", "wasnt", "werent", "wont",
    "wouldnt", "shouldnt", "couldnt", "hasnt", "havent", "hadnt", "aint", "mustnt", "neednt",
    "shant", "rarely", "seldom", "despite",
];

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("UnknownSymbol: {0} is not in the configured universe")]
    UnknownSymbol(String),
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("lexicon line {line}: {msg}")]
    BadLexicon { line: usize, msg: String },
    #[error("tweet record for {0} has neither text nor score")]
    EmptyRecord(String),
    #[error("precomputed score {0} outside [-1, 1]")]
    ScoreOutOfRange(f64),
    #[error("unparseable timestamp {0:?}")]
    BadTimestamp(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that maps a text to a polarity in [-1, 1].
pub trait PolarityScorer: Send + Sync {
    fn score(&self, text: &str) -> f64;
}

/// Token → valence map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

impl Lexicon {
    pub fn new(entries: HashMap<String, f64>) -> Result<Self, SentimentError> {
        if entries.is_empty() {
            return Err(SentimentError::EmptyLexicon);
        }
        Ok(Self { entries })
    }

    /// Parses `token<TAB>valence` lines; extra columns are ignored and `#`
    /// lines are comments.
    pub fn parse_tsv(src: &str) -> Result<Self, SentimentError> {
        let mut entries = HashMap::new();
        for (i, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let token = cols.next().unwrap_or_default().trim().to_lowercase();
            let valence = cols
                .next()
                .ok_or_else(|| SentimentError::BadLexicon { line: i + 1, msg: "missing valence column".into() })?
                .trim()
                .parse::<f64>()
                .map_err(|e| SentimentError::BadLexicon { line: i + 1, msg: e.to_string() })?;
            if token.is_empty() || !valence.is_finite() {
                return Err(SentimentError::BadLexicon { line: i + 1, msg: "empty token or non-finite valence".into() });
            }
            entries.insert(token, valence);
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, SentimentError> {
        Self::parse_tsv(&std::fs::read_to_string(path)?)
    }

    /// Small general-purpose lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse_tsv(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Positive and negative tokens, each in alphabetical order.
    pub fn tokens_by_sign(&self) -> (Vec<(&str, f64)>, Vec<(&str, f64)>) {
        let mut pos: Vec<_> = self.entries.iter().filter(|(_, v)| **v > 0.0).map(|(k, v)| (k.as_str(), *v)).collect();
        let mut neg: Vec<_> = self.entries.iter().filter(|(_, v)| **v < 0.0).map(|(k, v)| (k.as_str(), *v)).collect();
        pos.sort_by(|a, b| a.0.cmp(b.0));
        neg.sort_by(|a, b| a.0.cmp(b.0));
        (pos, neg)
    }
}

/// Lexicon-and-rule scorer: summed valences with windowed negation, squashed
/// into (-1, 1).
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    lexicon: Lexicon,
    negators: HashSet<String>,
    window: usize,
    alpha: f64,
}

impl LexiconScorer {
    pub fn new(lexicon: Lexicon) -> Self {
        Self {
            lexicon,
            negators: NEGATORS.iter().map(|s| s.to_string()).collect(),
            window: NEGATION_WINDOW,
            alpha: ALPHA,
        }
    }

    pub fn with_negators(mut self, negators: impl IntoIterator<Item = String>) -> Self {
        self.negators = negators.into_iter().collect();
        self
    }

    fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token) || token.ends_with("n't")
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '$'))
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

impl PolarityScorer for LexiconScorer {
    fn score(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        let mut total = 0.0;
        for (i, tok) in tokens.iter().enumerate() {
            let Some(mut v) = self.lexicon.get(tok) else { continue };
            let from = i.saturating_sub(self.window);
            if tokens[from..i].iter().any(|t| self.is_negator(t)) {
                v = -v;
            }
            total += v;
        }
        if total == 0.0 {
            return 0.0;
        }
        total / (total * total + self.alpha).sqrt()
    }
}

pub fn score_text(text: &str, lexicon: &Lexicon) -> f64 {
    LexiconScorer::new(lexicon.clone()).score(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub symbol: String,
    /// Exchange-local wall-clock time.
    pub timestamp: NaiveDateTime,
    pub text: Option<String>,
    pub precomputed_score: Option<f64>,
}

impl TweetRecord {
    pub fn validate(&self) -> Result<(), SentimentError> {
        match (self.text.as_ref(), self.precomputed_score) {
            (None, None) => Err(SentimentError::EmptyRecord(self.symbol.clone())),
            (_, Some(s)) if !(-1.0..=1.0).contains(&s) => Err(SentimentError::ScoreOutOfRange(s)),
            _ => Ok(()),
        }
    }

    fn polarity(&self, scorer: &dyn PolarityScorer) -> f64 {
        match (self.precomputed_score, self.text.as_deref()) {
            (Some(s), _) => s,
            (None, Some(t)) => scorer.score(t),
            (None, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySocialStats {
    pub date: NaiveDate,
    pub tweet_count: u64,
    pub mean_polarity: f64,
}

/// Market close and the exchange's UTC offset, used to map instants onto
/// trading sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionClock {
    pub close: NaiveTime,
    pub utc_offset: FixedOffset,
}

impl Default for SessionClock {
    fn default() -> Self {
        Self {
            close: NaiveTime::from_hms_opt(16, 0, 0).unwrap(),
            utc_offset: FixedOffset::west_opt(5 * 3600).unwrap(),
        }
    }
}

impl SessionClock {
    /// Accepts RFC 3339 instants (converted to exchange time), naive
    /// `YYYY-MM-DD[T ]HH:MM[:SS]` local times, or integer unix seconds.
    pub fn parse_timestamp(&self, raw: &str) -> Result<NaiveDateTime, SentimentError> {
        let s = raw.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(dt.with_timezone(&self.utc_offset).naive_local());
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(dt);
            }
        }
        if let Ok(secs) = s.parse::<i64>() {
            if let Some(dt) = DateTime::from_timestamp(secs, 0) {
                return Ok(dt.with_timezone(&self.utc_offset).naive_local());
            }
        }
        Err(SentimentError::BadTimestamp(raw.to_string()))
    }

    /// Trading date whose session a tweet precedes: before the close it
    /// belongs to its own day, at or after the close it rolls forward.
    pub fn session_for(&self, ts: NaiveDateTime, calendar: &TradingCalendar) -> Option<NaiveDate> {
        let date = ts.date();
        if ts.time() < self.close {
            calendar.on_or_after(date)
        } else {
            calendar.after(date)
        }
    }
}

/// Buckets tweets by trading session and reports count and mean polarity per
/// symbol and day. Every symbol of `universe` gets a full calendar-length
/// series; tweets dated outside the calendar span are dropped.
pub fn aggregate_daily(
    records: &[TweetRecord],
    calendar: &TradingCalendar,
    universe: &BTreeSet<String>,
    clock: &SessionClock,
    scorer: &dyn PolarityScorer,
) -> Result<BTreeMap<String, Vec<DailySocialStats>>, SentimentError> {
    let (Some(first), Some(last)) = (calendar.first(), calendar.last()) else {
        return Ok(universe.iter().map(|s| (s.clone(), Vec::new())).collect());
    };
    let mut buckets: BTreeMap<&str, Vec<Vec<f64>>> = universe
        .iter()
        .map(|s| (s.as_str(), vec![Vec::new(); calendar.len()]))
        .collect();

    for rec in records {
        rec.validate()?;
        let Some(days) = buckets.get_mut(rec.symbol.as_str()) else {
            return Err(SentimentError::UnknownSymbol(rec.symbol.clone()));
        };
        let local = rec.timestamp.date();
        if local < first || local > last {
            continue;
        }
        if let Some(session) = clock.session_for(rec.timestamp, calendar) {
            let i = calendar.index_of(session).expect("session is a calendar day");
            days[i].push(rec.polarity(scorer));
        }
    }

    Ok(buckets
        .into_iter()
        .map(|(sym, days)| {
            let stats = days
                .into_iter()
                .zip(calendar.days())
                .map(|(mut scores, &date)| {
                    // order-independent summation
                    scores.sort_by(f64::total_cmp);
                    let n = scores.len();
                    let mean = if n == 0 { 0.0 } else { scores.iter().sum::<f64>() / n as f64 };
                    DailySocialStats { date, tweet_count: n as u64, mean_polarity: mean }
                })
                .collect();
            (sym.to_string(), stats)
        })
        .collect())
}
