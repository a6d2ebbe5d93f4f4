use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ivnowcast::features::Source;
use ivnowcast::ScenarioId;

fn ivnowcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivnowcast")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--stocks", "2", "--days", "620", "--out", p(dir)];
    args.extend_from_slice(extra);
    let o = ivnowcast(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn empty_chain_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let chains = dir.path().join("chains.csv");
    fs::write(&chains, "symbol,asof_date,expiry_date,right,strike,bid,ask\n").unwrap();
    let o = ivnowcast(&["iv", p(&chains)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("NoExpiries"), "{}", stderr(&o));
}

#[test]
fn malformed_row_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let chains = dir.path().join("chains.csv");
    fs::write(
        &chains,
        "symbol,asof_date,expiry_date,right,strike,bid,ask\n\
         AAA,2024-01-02,2024-01-19,C,100,1,1.2\n\
         AAA,2024-01-02,2024-01-19,X,100,1,1.2\n",
    )
    .unwrap();
    let o = ivnowcast(&["iv", p(&chains)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("chains.csv:3:"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_with_input_code() {
    assert_eq!(ivnowcast(&["backtest", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ivnowcast(&["backtest"]).status.code(), Some(2));
    assert_eq!(ivnowcast(&["--help"]).status.code(), Some(0));
}

#[test]
fn iv_from_generated_chains() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("b");
    let o = ivnowcast(&["synth", "--stocks", "1", "--days", "30", "--chains", "--out", p(&bundle)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("iv.csv");
    let o = ivnowcast(&["iv", p(&bundle.join("chains.csv")), "--rates", p(&bundle.join("rates.csv")), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let computed = ivnowcast::io::read_iv(&out).unwrap();
    let truth = ivnowcast::io::read_iv(&bundle.join("iv.csv")).unwrap();
    for (sym, series) in &truth {
        let got = &computed[sym];
        assert_eq!(got.len(), series.len());
        for (a, b) in got.iter().zip(series) {
            assert_eq!(a.date, b.date);
            assert!((a.iv - b.iv).abs() < 0.5, "{sym} {}: {} vs {}", a.date, a.iv, b.iv);
        }
    }
}

#[test]
fn regimes_reject_training_before_the_series() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let cfg = dir.path().join("config.toml");
    let o = ivnowcast(&["--config", p(&cfg), "regimes", "--train-end", "1990-01-01"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("TooFewObservations"), "{}", stderr(&o));

    let out = dir.path().join("reg");
    let o = ivnowcast(&["--config", p(&cfg), "--out", p(&out), "regimes", "--iter", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("regimes.csv").is_file());
}

#[test]
fn overflowing_iv_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let iv = dir.path().join("iv.csv");
    let mut text = String::from("symbol,date,iv\n");
    let start = chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for i in 0..40 {
        let v = if i % 2 == 0 { "1e300" } else { "-1e300" };
        text.push_str(&format!("AAA,{},{v}\n", start + chrono::Duration::days(i)));
    }
    fs::write(&iv, text).unwrap();
    let o = ivnowcast(&["--out", p(&dir.path().join("r")), "regimes", p(&iv)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn featurize_tweet_scenario_has_only_tweet_columns() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let cfg = dir.path().join("config.toml");
    let out = dir.path().join("feat");
    let o = ivnowcast(&["--config", p(&cfg), "--out", p(&out), "featurize", "--scenario", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let tweet_cols: Vec<&str> = ScenarioId::new(5).unwrap().features().iter().map(|f| f.name()).collect();
    assert!(ScenarioId::new(5).unwrap().features().iter().all(|f| f.source() == Source::Tweets));
    let files: Vec<_> = fs::read_dir(out.join("matrices")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 2);
    for f in files {
        assert!(f.to_string_lossy().ends_with("_S5.csv"));
        let mut r = csv::Reader::from_path(&f).unwrap();
        let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
        assert_eq!(header.first().map(String::as_str), Some("date"));
        assert_eq!(header.last().map(String::as_str), Some("target"));
        assert_eq!(&header[1..header.len() - 1], tweet_cols.as_slice());
    }
}

#[test]
fn backtest_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let cfg = dir.path().join("config.toml");
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str("scenarios = [3, 7]\nn_trees = 5\nmax_depth = [3]\nmin_samples_split = [10]\nmin_samples_leaf = [3]\nhmm_iter = 10\n");
    fs::write(&cfg, text).unwrap();

    let out = dir.path().join("rep");
    let o = ivnowcast(&["--config", p(&cfg), "--out", p(&out), "--threads", "1", "backtest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["summary.json", "scenario_medians.csv", "folds.csv", "regime_summary.csv", "regimes/regimes.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }

    let again = dir.path().join("again");
    let o = ivnowcast(&["--out", p(&again), "report", p(&out.join("summary.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(out.join("folds.csv")).unwrap(), fs::read(again.join("folds.csv")).unwrap());
}
