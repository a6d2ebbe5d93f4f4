//! 30-day implied volatility from a hand-built two-expiry option chain.
//!
//! Run with `cargo run --example vix_index`.

use chrono::{Duration, NaiveDate};
use ivnowcast::ivindex::{term_variance, ExpiryChain, Right, DAYS_PER_YEAR};
use ivnowcast::{iv30, OptionChainSnapshot, OptionQuote};

fn quotes(asof: NaiveDate, days: i64, forward: f64, vol: f64) -> Vec<OptionQuote> {
    let expiry = asof + Duration::days(days);
    let t = days as f64 / DAYS_PER_YEAR;
    (0..21)
        .flat_map(|i| {
            let k = 80.0 + 2.0 * i as f64;
            // time value shaped like a normal density around the forward
            let z = (k - forward) / (forward * vol * t.sqrt());
            let time_value = 0.4 * forward * vol * t.sqrt() * (-0.5 * z * z).exp();
            [
                (Right::Call, (forward - k).max(0.0) + time_value),
                (Right::Put, (k - forward).max(0.0) + time_value),
            ]
            .map(|(right, mid)| {
                let half = (0.01 * mid).max(0.005);
                OptionQuote::new(expiry, k, right, (mid - half).max(0.0), mid + half)
            })
        })
        .collect()
}

fn main() {
    let asof = NaiveDate::from_ymd_opt(2024, 5, 1).unwrap();
    let mut all = quotes(asof, 23, 100.4, 0.22);
    all.extend(quotes(asof, 37, 100.6, 0.24));
    let snapshot = OptionChainSnapshot { symbol: "DEMO".into(), asof, quotes: all.clone(), risk_free_rate: 0.03 };

    for days in [23, 37] {
        let expiry = asof + Duration::days(days);
        let chain = ExpiryChain::from_quotes(expiry, all.iter().filter(|q| q.expiry == expiry)).unwrap();
        let term = term_variance(&chain, 0.03, days as f64 / DAYS_PER_YEAR).unwrap();
        println!(
            "{expiry}: T={:.4} F={:.4} K0={} sigma={:.2}%",
            term.t,
            term.forward,
            term.k0,
            100.0 * term.sigma_squared.sqrt()
        );
    }
    let point = iv30(&snapshot).unwrap();
    println!("iv30 on {} = {:.2}", point.date, point.iv);
}
