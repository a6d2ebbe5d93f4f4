//! Model-free 30-day implied volatility index computed from an option chain.
//!
//! Each expiry is reduced to a single annualized variance by summing the
//! strike-weighted midpoints of out-of-the-money options around the forward,
//! and the two expiries bracketing the 30-day horizon are blended by linear
//! interpolation of total variance.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Target horizon of the index, in calendar days.
pub const HORIZON_DAYS: i64 = 30;
/// Day-count basis for year fractions.
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IvError {
    #[error("no usable {0} strike on one side of K0 for expiry {1}")]
    EmptySide(Right, NaiveDate),
    #[error("no strike with both call and put quoted for expiry {0}")]
    NoPairedStrike(NaiveDate),
    #[error("NoExpiries: option chain for {0} on {1} has no quotes")]
    NoExpiries(String, NaiveDate),
    #[error("invalid quote: {0}")]
    InvalidQuote(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Right {
    Call,
    Put,
}

impl std::fmt::Display for Right {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Right::Call => f.write_str("call"),
            Right::Put => f.write_str("put"),
        }
    }
}

impl std::str::FromStr for Right {
    type Err = IvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "c" | "call" => Ok(Right::Call),
            "p" | "put" => Ok(Right::Put),
            other => Err(IvError::InvalidQuote(format!("unknown option right {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub expiry: NaiveDate,
    pub strike: f64,
    pub right: Right,
    pub bid: f64,
    pub ask: f64,
    /// Contract volume traded on the snapshot date, when the source has it.
    #[serde(default)]
    pub volume: Option<f64>,
}

impl OptionQuote {
    pub fn new(expiry: NaiveDate, strike: f64, right: Right, bid: f64, ask: f64) -> Self {
        Self { expiry, strike, right, bid, ask, volume: None }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    fn validate(&self) -> Result<(), IvError> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(IvError::InvalidQuote(format!("strike must be > 0, got {}", self.strike)));
        }
        if !(self.bid.is_finite() && self.bid >= 0.0) {
            return Err(IvError::InvalidQuote(format!("bid must be >= 0, got {}", self.bid)));
        }
        if !(self.ask.is_finite() && self.ask >= self.bid) {
            return Err(IvError::InvalidQuote(format!(
                "ask {} below bid {} at strike {}",
                self.ask, self.bid, self.strike
            )));
        }
        Ok(())
    }
}

/// All quotes for one underlying on one date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChainSnapshot {
    pub symbol: String,
    pub asof: NaiveDate,
    pub quotes: Vec<OptionQuote>,
    /// Annualized continuously compounded rate used for every expiry.
    pub risk_free_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermVariance {
    pub expiry: NaiveDate,
    /// Time to expiry as a year fraction.
    pub t: f64,
    pub forward: f64,
    pub k0: f64,
    pub sigma_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub date: NaiveDate,
    /// Volatility in percentage points (e.g. 22.3).
    pub iv: f64,
}

/// One listed strike of an expiry with whatever sides are quoted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrikeRow {
    pub strike: f64,
    pub call: Option<Side>,
    pub put: Option<Side>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Side {
    pub bid: f64,
    pub mid: f64,
}

impl Side {
    fn usable(&self) -> bool {
        self.bid > 0.0
    }
}

/// Quotes of a single expiry, sorted by strike.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpiryChain {
    pub expiry: NaiveDate,
    pub rows: Vec<StrikeRow>,
}

impl ExpiryChain {
    /// Groups quotes of one expiry by strike. Duplicate (strike, right) pairs
    /// keep the last quote seen.
    pub fn from_quotes<'a>(
        expiry: NaiveDate,
        quotes: impl IntoIterator<Item = &'a OptionQuote>,
    ) -> Result<Self, IvError> {
        let mut rows: Vec<StrikeRow> = Vec::new();
        for q in quotes {
            q.validate()?;
            let side = Side { bid: q.bid, mid: q.mid() };
            let idx = match rows.iter().position(|r| r.strike == q.strike) {
                Some(i) => i,
                None => {
                    rows.push(StrikeRow { strike: q.strike, call: None, put: None });
                    rows.len() - 1
                }
            };
            match q.right {
                Right::Call => rows[idx].call = Some(side),
                Right::Put => rows[idx].put = Some(side),
            }
        }
        rows.sort_by(|a, b| a.strike.total_cmp(&b.strike));
        Ok(Self { expiry, rows })
    }
}

/// A strike contributing to the variance sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectedStrike {
    pub strike: f64,
    pub delta_k: f64,
    /// Midpoint price Q(K); the put/call average at K0.
    pub price: f64,
}

/// Forward level from put-call parity at the strike with the smallest
/// |call mid - put mid|, and K0 as the largest listed strike at or below it.
pub fn forward_and_k0(chain: &ExpiryChain, rate: f64, t: f64) -> Result<(f64, f64), IvError> {
    let mut best: Option<(f64, f64)> = None; // (strike, call - put)
    for row in &chain.rows {
        if let (Some(c), Some(p)) = (row.call, row.put) {
            let diff = c.mid - p.mid;
            // strict < keeps the lowest strike on ties
            if best.is_none_or(|(_, d)| diff.abs() < d.abs()) {
                best = Some((row.strike, diff));
            }
        }
    }
    let (k_star, diff) = best.ok_or(IvError::NoPairedStrike(chain.expiry))?;
    let forward = k_star + (rate * t).exp() * diff;
    let k0 = chain
        .rows
        .iter()
        .rev()
        .find(|r| r.strike <= forward)
        .map(|r| r.strike)
        .ok_or(IvError::EmptySide(Right::Put, chain.expiry))?;
    Ok((forward, k0))
}

/// Out-of-the-money strike set around `k0`.
///
/// Puts below K0 and calls above it are taken walking outward; zero-bid
/// quotes are skipped and a side stops after two consecutive zero bids. K0
/// itself is priced as the average of its usable call and put midpoints.
/// Each side needs at least one usable quote, counting K0's own call or put.
pub fn select_term_strikes(
    chain: &ExpiryChain,
    _forward: f64,
    k0: f64,
) -> Result<Vec<SelectedStrike>, IvError> {
    let rows = &chain.rows;
    let k0_idx = rows
        .iter()
        .position(|r| r.strike == k0)
        .ok_or_else(|| IvError::InvalidQuote(format!("K0 {k0} is not a listed strike")))?;

    let mut picked: Vec<(f64, f64)> = Vec::new();

    let walk = |indices: &mut dyn Iterator<Item = usize>, right: Right, out: &mut Vec<(f64, f64)>| {
        let mut zero_run = 0;
        for i in indices {
            let side = match right {
                Right::Put => rows[i].put,
                Right::Call => rows[i].call,
            };
            match side {
                Some(s) if s.usable() => {
                    zero_run = 0;
                    out.push((rows[i].strike, s.mid));
                }
                _ => {
                    zero_run += 1;
                    if zero_run == 2 {
                        break;
                    }
                }
            }
        }
    };

    let mut puts = Vec::new();
    walk(&mut (0..k0_idx).rev(), Right::Put, &mut puts);
    let mut calls = Vec::new();
    walk(&mut (k0_idx + 1..rows.len()), Right::Call, &mut calls);

    let at_k0 = &rows[k0_idx];
    let k0_put = at_k0.put.filter(Side::usable);
    let k0_call = at_k0.call.filter(Side::usable);
    if puts.is_empty() && k0_put.is_none() {
        return Err(IvError::EmptySide(Right::Put, chain.expiry));
    }
    if calls.is_empty() && k0_call.is_none() {
        return Err(IvError::EmptySide(Right::Call, chain.expiry));
    }
    let k0_price = match (k0_put, k0_call) {
        (Some(p), Some(c)) => 0.5 * (p.mid + c.mid),
        (Some(p), None) => p.mid,
        (None, Some(c)) => c.mid,
        (None, None) => unreachable!("checked above"),
    };

    picked.extend(puts.into_iter().rev());
    picked.push((k0, k0_price));
    picked.extend(calls);

    if picked.len() < 2 {
        // A lone strike has no spacing to weight it with.
        let side = if k0_put.is_some() { Right::Call } else { Right::Put };
        return Err(IvError::EmptySide(side, chain.expiry));
    }

    let n = picked.len();
    Ok((0..n)
        .map(|i| {
            let delta_k = if i == 0 {
                picked[1].0 - picked[0].0
            } else if i == n - 1 {
                picked[n - 1].0 - picked[n - 2].0
            } else {
                0.5 * (picked[i + 1].0 - picked[i - 1].0)
            };
            SelectedStrike { strike: picked[i].0, delta_k, price: picked[i].1 }
        })
        .collect())
}

/// Variance sum over an already selected strike set, floored at zero.
pub fn variance_from_strikes(strikes: &[SelectedStrike], rate: f64, t: f64, forward: f64, k0: f64) -> f64 {
    let growth = (rate * t).exp();
    let sum: f64 = strikes
        .iter()
        .map(|s| s.delta_k / (s.strike * s.strike) * growth * s.price)
        .sum();
    let correction = (forward / k0 - 1.0).powi(2);
    (2.0 / t * sum - correction / t).max(0.0)
}

pub fn term_variance(chain: &ExpiryChain, rate: f64, t: f64) -> Result<TermVariance, IvError> {
    let (forward, k0) = forward_and_k0(chain, rate, t)?;
    let strikes = select_term_strikes(chain, forward, k0)?;
    Ok(TermVariance {
        expiry: chain.expiry,
        t,
        forward,
        k0,
        sigma_squared: variance_from_strikes(&strikes, rate, t, forward, k0),
    })
}

/// Blends two term variances to the 30-day horizon by linear interpolation
/// (or extrapolation) of total variance in time and returns the index value.
pub fn interpolate_to_horizon(near: &TermVariance, next: &TermVariance) -> f64 {
    let t30 = HORIZON_DAYS as f64 / DAYS_PER_YEAR;
    let (t1, t2) = (near.t, next.t);
    let w1 = (t2 - t30) / (t2 - t1);
    let w2 = (t30 - t1) / (t2 - t1);
    let total = t1 * near.sigma_squared * w1 + t2 * next.sigma_squared * w2;
    100.0 * (total.max(0.0) / t30).sqrt()
}

/// 30-day implied volatility index for one snapshot.
pub fn iv30(chain: &OptionChainSnapshot) -> Result<IvPoint, IvError> {
    let mut by_expiry: BTreeMap<NaiveDate, Vec<&OptionQuote>> = BTreeMap::new();
    for q in &chain.quotes {
        if q.expiry <= chain.asof {
            return Err(IvError::InvalidQuote(format!(
                "expiry {} is not after snapshot date {}",
                q.expiry, chain.asof
            )));
        }
        by_expiry.entry(q.expiry).or_default().push(q);
    }
    if by_expiry.is_empty() {
        return Err(IvError::NoExpiries(chain.symbol.clone(), chain.asof));
    }

    let days: Vec<(NaiveDate, i64)> = by_expiry
        .keys()
        .map(|&e| (e, (e - chain.asof).num_days()))
        .collect();

    let chosen: Vec<NaiveDate> = if days.len() == 1 {
        vec![days[0].0]
    } else {
        let below = days.iter().rposition(|&(_, d)| d <= HORIZON_DAYS);
        match below {
            Some(i) if i + 1 < days.len() => vec![days[i].0, days[i + 1].0],
            // everything at or inside 30 days: two farthest
            Some(i) => vec![days[i - 1].0, days[i].0],
            // everything beyond 30 days: two nearest
            None => vec![days[0].0, days[1].0],
        }
    };

    let terms = chosen
        .iter()
        .map(|e| {
            let ec = ExpiryChain::from_quotes(*e, by_expiry[e].iter().copied())?;
            let t = (*e - chain.asof).num_days() as f64 / DAYS_PER_YEAR;
            term_variance(&ec, chain.risk_free_rate, t)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let iv = match terms.as_slice() {
        [single] => 100.0 * single.sigma_squared.max(0.0).sqrt(),
        [near, next] => interpolate_to_horizon(near, next),
        _ => unreachable!(),
    };
    Ok(IvPoint { date: chain.asof, iv })
}

/// Average daily dollar option volume of one snapshot:
/// Σ volume × mid × 100 over quotes carrying a volume.
pub fn dollar_option_volume(chain: &OptionChainSnapshot) -> Option<f64> {
    let mut any = false;
    let total = chain
        .quotes
        .iter()
        .filter_map(|q| {
            q.volume.map(|v| {
                any = true;
                v * q.mid() * 100.0
            })
        })
        .sum();
    any.then_some(total)
}
