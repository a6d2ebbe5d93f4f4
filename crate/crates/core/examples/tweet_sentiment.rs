//! Lexicon scoring of tweets and bucketing into trading sessions.
//!
//! Run with `cargo run --example tweet_sentiment`.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use ivnowcast::sentiment::{aggregate_daily, PolarityScorer, SessionClock};
use ivnowcast::{Lexicon, LexiconScorer, TradingCalendar, TweetRecord};

fn main() {
    let scorer = LexiconScorer::new(Lexicon::bundled());
    let clock = SessionClock::default();
    let texts = [
        ("2024-03-04T09:15:00", "great quarter, strong beat and raising guidance"),
        ("2024-03-04T15:59:00", "not good at all, weak margins"),
        ("2024-03-04T16:30:00", "after hours selloff looks ugly"),
        ("2024-03-09T11:00:00", "weekend chatter: bullish on the new product"),
    ];
    let records: Vec<TweetRecord> = texts
        .iter()
        .map(|(ts, text)| TweetRecord {
            symbol: "AAPL".into(),
            timestamp: clock.parse_timestamp(ts).unwrap(),
            text: Some(text.to_string()),
            precomputed_score: None,
        })
        .collect();
    for r in &records {
        println!("{:>+.3}  {}", scorer.score(r.text.as_deref().unwrap()), r.text.as_deref().unwrap());
    }

    let days = ["2024-03-04", "2024-03-05", "2024-03-06", "2024-03-07", "2024-03-08", "2024-03-11"];
    let calendar = TradingCalendar::new(days.iter().map(|d| d.parse::<NaiveDate>().unwrap()).collect());
    let universe = BTreeSet::from(["AAPL".to_string()]);
    let daily = aggregate_daily(&records, &calendar, &universe, &clock, &scorer).unwrap();
    for s in &daily["AAPL"] {
        println!("{}  tweets={}  mean polarity={:+.3}", s.date, s.tweet_count, s.mean_polarity);
    }
}
