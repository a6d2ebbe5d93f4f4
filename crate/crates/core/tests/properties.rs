use std::collections::BTreeSet;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use proptest::prelude::*;

use ivnowcast::calendar::TradingCalendar;
use ivnowcast::eval::metrics::auc;
use ivnowcast::eval::walkforward::{expected_fold_count, make_plan, PlanParams};
use ivnowcast::forest::{fit_forest, Dataset, ForestConfig};
use ivnowcast::ivindex::{
    interpolate_to_horizon, iv30, variance_from_strikes, OptionChainSnapshot, OptionQuote, Right, SelectedStrike,
    TermVariance,
};
use ivnowcast::sentiment::{aggregate_daily, LexiconScorer, SessionClock};
use ivnowcast::{Lexicon, TweetRecord};

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn chain(fwd: f64, width: f64, days: [i64; 2], scale: f64) -> OptionChainSnapshot {
    let asof = d("2022-06-01");
    let strikes = [60.0, 75.0, 85.0, 90.0, 95.0, 100.0, 105.0, 110.0, 120.0, 140.0];
    let mut quotes = Vec::new();
    for (j, &days) in days.iter().enumerate() {
        let e = asof + Duration::days(days);
        let w = width * (1.0 + 0.3 * j as f64);
        for &k in &strikes {
            let smile = w * (-((k - fwd) / 25.0).powi(2)).exp() + 0.1;
            for (right, mid) in [(Right::Call, (fwd - k).max(0.0) + smile), (Right::Put, (k - fwd).max(0.0) + smile)] {
                quotes.push(OptionQuote::new(e, k * scale, right, (mid - 0.05) * scale, (mid + 0.05) * scale));
            }
        }
    }
    OptionChainSnapshot { symbol: "P".into(), asof, quotes, risk_free_rate: 0.01 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn iv_scale_equivariant(fwd in 88.0..112.0f64, width in 0.5..6.0f64, near in 5i64..30, gap in 1i64..40, c in 0.05..50.0f64) {
        let base = iv30(&chain(fwd, width, [near, near + gap], 1.0)).unwrap().iv;
        let scaled = iv30(&chain(fwd, width, [near, near + gap], c)).unwrap().iv;
        prop_assert!(((base - scaled) / base).abs() < 1e-9, "{base} vs {scaled}");
    }

    #[test]
    fn iv_is_deterministic(fwd in 88.0..112.0f64, width in 0.5..6.0f64) {
        let ch = chain(fwd, width, [20, 41], 1.0);
        prop_assert_eq!(iv30(&ch).unwrap().iv.to_bits(), iv30(&ch.clone()).unwrap().iv.to_bits());
    }

    #[test]
    fn variance_monotone_in_prices(
        prices in prop::collection::vec(0.01..20.0f64, 3..12),
        bump_at in any::<prop::sample::Index>(),
        bump in 0.0..5.0f64,
        t in 0.01..0.5f64,
    ) {
        let strikes: Vec<SelectedStrike> = prices
            .iter()
            .enumerate()
            .map(|(i, &p)| SelectedStrike { strike: 80.0 + 5.0 * i as f64, delta_k: 5.0, price: p })
            .collect();
        let k0 = strikes[strikes.len() / 2].strike;
        let before = variance_from_strikes(&strikes, 0.02, t, k0 + 1.0, k0);
        let mut bumped = strikes.clone();
        bumped[bump_at.index(strikes.len())].price += bump;
        let after = variance_from_strikes(&bumped, 0.02, t, k0 + 1.0, k0);
        prop_assert!(after >= before);
    }

    #[test]
    fn interpolation_between_terms(near in 1i64..=30, far in 30i64..90, v1 in 0.0..0.5f64, v2 in 0.0..0.5f64) {
        prop_assume!(far > near);
        let e = d("2022-01-01");
        let term = |days: i64, v: f64| TermVariance { expiry: e, t: days as f64 / 365.0, forward: 100.0, k0: 100.0, sigma_squared: v };
        let (a, b) = (term(near, v1), term(far, v2));
        let iv = interpolate_to_horizon(&a, &b);
        let t30 = 30.0 / 365.0;
        let at30 = |x: &TermVariance| 100.0 * (x.t * x.sigma_squared / t30).sqrt();
        let (lo, hi) = (at30(&a).min(at30(&b)), at30(&a).max(at30(&b)));
        prop_assert!(iv >= lo - 1e-9 && iv <= hi + 1e-9, "{iv} outside [{lo}, {hi}]");
    }

    #[test]
    fn auc_symmetry_and_monotone_invariance(raw in prop::collection::vec((0i32..50, 0u8..2), 2..80)) {
        let mut raw = raw;
        raw[0].1 = 0;
        raw[1].1 = 1;
        let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64).collect();
        let labels: Vec<u8> = raw.iter().map(|r| r.1).collect();
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        let a = auc(&scores, &labels).unwrap();
        prop_assert!((a + auc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
        let stretched: Vec<f64> = scores.iter().map(|s| 4.0 * s - 7.0).collect();
        prop_assert_eq!(a, auc(&stretched, &labels).unwrap());
    }

    #[test]
    fn walk_forward_matches_closed_form(t in 1usize..200, extra in 1usize..400, k in 1usize..60, step in 1usize..60) {
        let params = PlanParams { initial_train: t, test_window: k, step };
        let plan = make_plan(t + extra, params).unwrap();
        prop_assert_eq!(plan.folds.len(), expected_fold_count(t + extra, params));
        for f in &plan.folds {
            prop_assert!(f.train.end <= f.test.start);
            prop_assert_eq!(f.train.start, 0);
        }
    }

    #[test]
    fn sentiment_permutation_and_conservation(
        tweets in prop::collection::vec((0i64..(9 * 24 * 60), -1.0..1.0f64), 0..60),
        seed in any::<u64>(),
    ) {
        let calendar = TradingCalendar::new((0..12).map(|i| d("2023-03-01") + Duration::days(i)).collect());
        let start: NaiveDateTime = d("2023-03-01").and_hms_opt(0, 0, 0).unwrap();
        let recs: Vec<TweetRecord> = tweets
            .iter()
            .map(|&(m, s)| TweetRecord {
                symbol: "AAA".into(),
                timestamp: start + Duration::minutes(m),
                text: None,
                precomputed_score: Some(s),
            })
            .collect();
        let universe = BTreeSet::from(["AAA".to_string()]);
        let clock = SessionClock::default();
        let scorer = LexiconScorer::new(Lexicon::bundled());
        let out = aggregate_daily(&recs, &calendar, &universe, &clock, &scorer).unwrap();

        let mut shuffled = recs.clone();
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed.wrapping_mul(i as u64 + 1) % (i as u64 + 1)) as usize);
        }
        let again = aggregate_daily(&shuffled, &calendar, &universe, &clock, &scorer).unwrap();
        for (x, y) in out["AAA"].iter().zip(&again["AAA"]) {
            prop_assert_eq!(x.tweet_count, y.tweet_count);
            prop_assert!((x.mean_polarity - y.mean_polarity).abs() < 1e-12);
        }

        let total: u64 = out["AAA"].iter().map(|s| s.tweet_count).sum();
        prop_assert_eq!(total as usize, recs.len());
        let mass: f64 = out["AAA"].iter().map(|s| s.tweet_count as f64 * s.mean_polarity).sum();
        let want: f64 = recs.iter().map(|r| r.precomputed_score.unwrap()).sum();
        prop_assert!((mass - want).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forest_invariant_under_monotone_features(
        rows in prop::collection::vec((prop::collection::vec(-24i32..24, 3), 0u8..2), 12..60),
        seed in any::<u64>(),
    ) {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.0.iter().map(|&v| v as f64 / 8.0).collect()).collect();
        let y: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let warped: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0].exp(), 2.0 * r[1] + 1.0, r[2].powi(3)]).collect();
        let cfg = ForestConfig { n_trees: 10, max_depth: 4, min_samples_split: 2, min_samples_leaf: 1, seed, bootstrap: false, ..Default::default() };
        let a = fit_forest(&Dataset::from_rows(&x, &y).unwrap(), &cfg).unwrap();
        let b = fit_forest(&Dataset::from_rows(&warped, &y).unwrap(), &cfg).unwrap();
        prop_assert_eq!(a.predict_many(&x).unwrap(), b.predict_many(&warped).unwrap());
    }
}
