//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivnowcast::eval::metrics::{auc, stratified_dummy};
use ivnowcast::eval::walkforward::{make_plan, PlanParams};
use ivnowcast::eval::ablation::{evaluate_matrix, stock_dummy_seed};
use ivnowcast::forest::{fit_tree, Dataset, ForestConfig, MaxFeatures, Node};
use ivnowcast::hmm::{fit_baum_welch, FitOptions, GaussianHmm};
use ivnowcast::ivindex::{iv30, OptionChainSnapshot, OptionQuote, Right};
use ivnowcast::synth::{generate, SyntheticSpec};
use ivnowcast::ScenarioId;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

// ---------------------------------------------------------------- 1

const ASOF: &str = "2021-03-01";
const NEAR_DAYS: i64 = 23;
const NEXT_DAYS: i64 = 37;
const RATE: f64 = 0.015;

struct Leg {
    days: i64,
    strikes: Vec<f64>,
    calls: Vec<f64>,
    puts: Vec<f64>,
}

fn legs() -> Vec<Leg> {
    let strikes = vec![70.0, 80.0, 85.0, 90.0, 95.0, 97.5, 100.0, 102.5, 105.0, 110.0, 120.0, 135.0];
    let mk = |days: i64, fwd: f64, width: f64| {
        let smile = |k: f64| width * (-((k - fwd) / (0.25 * fwd)).powi(2)).exp() + 0.05;
        Leg {
            days,
            strikes: strikes.clone(),
            calls: strikes.iter().map(|&k| (fwd - k).max(0.0) + smile(k)).collect(),
            puts: strikes.iter().map(|&k| (k - fwd).max(0.0) + smile(k)).collect(),
        }
    };
    vec![mk(NEAR_DAYS, 101.3, 3.1), mk(NEXT_DAYS, 101.6, 4.2)]
}

fn snapshot(legs: &[Leg], scale: f64) -> OptionChainSnapshot {
    let asof = d(ASOF);
    let mut quotes = Vec::new();
    for leg in legs {
        let e = asof + chrono::Duration::days(leg.days);
        for (i, &k) in leg.strikes.iter().enumerate() {
            for (right, mid) in [(Right::Call, leg.calls[i]), (Right::Put, leg.puts[i])] {
                quotes.push(OptionQuote::new(e, k * scale, right, (mid - 0.02) * scale, (mid + 0.02) * scale));
            }
        }
    }
    OptionChainSnapshot { symbol: "FIX".into(), asof, quotes, risk_free_rate: RATE }
}

/// Term variance evaluated strike by strike, straight from the definition.
fn oracle_term(leg: &Leg) -> (f64, f64) {
    let t = leg.days as f64 / 365.0;
    let n = leg.strikes.len();
    let mut star = 0;
    for i in 1..n {
        if (leg.calls[i] - leg.puts[i]).abs() < (leg.calls[star] - leg.puts[star]).abs() {
            star = i;
        }
    }
    let f = leg.strikes[star] + (RATE * t).exp() * (leg.calls[star] - leg.puts[star]);
    let i0 = (0..n).filter(|&i| leg.strikes[i] <= f).max().unwrap();
    let k0 = leg.strikes[i0];
    let mut sum = 0.0;
    for i in 0..n {
        let k = leg.strikes[i];
        let dk = if i == 0 {
            leg.strikes[1] - leg.strikes[0]
        } else if i == n - 1 {
            leg.strikes[n - 1] - leg.strikes[n - 2]
        } else {
            (leg.strikes[i + 1] - leg.strikes[i - 1]) / 2.0
        };
        let q = if i < i0 {
            leg.puts[i]
        } else if i > i0 {
            leg.calls[i]
        } else {
            (leg.calls[i] + leg.puts[i]) / 2.0
        };
        sum += dk / (k * k) * (RATE * t).exp() * q;
    }
    (t, 2.0 / t * sum - (f / k0 - 1.0).powi(2) / t)
}

fn oracle_iv(legs: &[Leg]) -> f64 {
    let (t1, v1) = oracle_term(&legs[0]);
    let (t2, v2) = oracle_term(&legs[1]);
    let t30 = 30.0 / 365.0;
    let total = t1 * v1 + (t2 * v2 - t1 * v1) * (t30 - t1) / (t2 - t1);
    100.0 * (total / t30).sqrt()
}

fn vix_oracle() -> Outcome {
    let start = Instant::now();
    let legs = legs();
    let expected = oracle_iv(&legs);
    let got = iv30(&snapshot(&legs, 1.0)).map_err(|e| e.to_string())?.iv;
    let rel = ((got - expected) / expected).abs();
    ensure(rel <= 1e-10, || format!("iv30 {got} vs oracle {expected} (rel {rel:e})"))?;
    for c in [0.5, 2.0, 10.0] {
        let scaled = iv30(&snapshot(&legs, c)).map_err(|e| e.to_string())?.iv;
        let r = ((scaled - got) / got).abs();
        ensure(r <= 1e-10, || format!("scale {c}: {scaled} vs {got}"))?;
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("iv30 = {got:.10}, rel err {rel:.1e}"))
}

// ---------------------------------------------------------------- 2

/// Exact rational p/q with q > 0.
#[derive(Clone, Copy)]
struct Frac(u128, u128);

impl Frac {
    fn lt(self, o: Frac) -> bool {
        self.0 * o.1 < o.0 * self.1
    }
    fn eq(self, o: Frac) -> bool {
        self.0 * o.1 == o.0 * self.1
    }
}

/// Weighted child Gini, Σ_c (n_c/n)·(1 − Σ_k p_ck²), with n = n_l + n_r.
fn weighted_gini(children: [(u128, u128); 2]) -> Frac {
    let n: u128 = children.iter().map(|c| c.0 + c.1).sum();
    // (n_c/n)·(2·a·b/n_c²) = 2ab / (n·n_c); common denominator n·n_l·n_r
    let (l, r) = (children[0], children[1]);
    let (nl, nr) = (l.0 + l.1, r.0 + r.1);
    Frac(2 * l.0 * l.1 * nr + 2 * r.0 * r.1 * nl, n * nl * nr)
}

fn exhaustive_root(rows: &[Vec<f64>], y: &[u8]) -> Option<(usize, f64)> {
    if y.iter().all(|&v| v == y[0]) {
        return None;
    }
    let mut best: Option<(Frac, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let mut counts = [(0u128, 0u128); 2];
            for (r, &lab) in rows.iter().zip(y) {
                let side = usize::from(r[f] > thr);
                if lab == 1 {
                    counts[side].0 += 1;
                } else {
                    counts[side].1 += 1;
                }
            }
            let g = weighted_gini(counts);
            let better = match best {
                None => true,
                Some((bg, bf, bt)) => g.lt(bg) || (g.eq(bg) && (f, thr) < (bf, bt)),
            };
            if better {
                best = Some((g, f, thr));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn cart_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = ForestConfig {
        n_trees: 1,
        max_depth: 1,
        min_samples_split: 2,
        min_samples_leaf: 1,
        max_features: MaxFeatures::All,
        bootstrap: false,
        ..ForestConfig::default()
    };
    let mut splits = 0;
    for inst in 0..200 {
        let n = rng.random_range(2..=20);
        let f = rng.random_range(1..=3);
        let levels = rng.random_range(2..=8);
        let rows: Vec<Vec<f64>> =
            (0..n).map(|_| (0..f).map(|_| rng.random_range(0..levels) as f64 * 0.5).collect()).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let data = Dataset::from_rows(&rows, &y).map_err(|e| e.to_string())?;
        let tree = fit_tree(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(inst)).map_err(|e| e.to_string())?;
        let got = match tree.root() {
            Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        };
        let want = exhaustive_root(&rows, &y);
        ensure(got == want, || format!("instance {inst}: tree {got:?}, exhaustive {want:?}"))?;
        splits += usize::from(got.is_some());
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("200 instances, {splits} with a root split"))
}

// ---------------------------------------------------------------- 3

fn forest_null_signal() -> Outcome {
    let start = Instant::now();
    let spec = SyntheticSpec { n_stocks: 4, n_days: 1000, seed: 7, ..Default::default() };
    let bundle = generate(&spec).map_err(|e| e.to_string())?;
    let stocks = bundle.stock_data().map_err(|e| e.to_string())?;
    let plan = PlanParams::default();
    let single = ForestConfig::grid_from(&[6], &[10], &[3], 200, 42);
    let reduced = ForestConfig::grid_from(&[4, 8], &[10], &[3], 200, 42);
    let s3 = ScenarioId::new(3).unwrap();
    let s7 = ScenarioId::new(7).unwrap();

    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut null_folds = 0;
    let mut lines = Vec::new();
    for (i, s) in stocks.iter().enumerate() {
        let mut m = s.matrix(s7).map_err(|e| e.to_string())?;
        m.targets.shuffle(&mut ChaCha8Rng::seed_from_u64(100 + i as u64));
        let null = evaluate_matrix(&m, &single, plan, stock_dummy_seed(42, &s.symbol)).map_err(|e| e.to_string())?;
        null_folds += null.folds.len();
        for p in &null.predictions {
            pooled_scores.push(p.score);
            pooled_labels.push(p.label);
        }

        let m3 = s.matrix(s3).map_err(|e| e.to_string())?;
        let sig = evaluate_matrix(&m3, &reduced, plan, stock_dummy_seed(42, &s.symbol)).map_err(|e| e.to_string())?;
        let (a, dm) = (sig.auc.unwrap_or(f64::NAN), sig.dummy_auc.unwrap_or(f64::NAN));
        ensure(a >= dm + 0.05, || format!("{}: S3 AUC {a:.4} < dummy {dm:.4} + 0.05", s.symbol))?;
        lines.push(format!("{} {a:.3}/{dm:.3}", s.symbol));
    }
    let null_auc = auc(&pooled_scores, &pooled_labels).map_err(|e| e.to_string())?;
    ensure(null_folds >= 10, || format!("only {null_folds} folds"))?;
    ensure((0.45..=0.55).contains(&null_auc), || format!("shuffled S7 AUC {null_auc:.4}"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("null AUC {null_auc:.4} over {null_folds} folds; S3 model/dummy {}", lines.join(", ")))
}

// ---------------------------------------------------------------- 4

fn grid_shape() -> Outcome {
    let grid = ForestConfig::grid(1000, 42);
    ensure(grid.len() == 64, || format!("{} configs", grid.len()))?;
    ensure(grid.iter().all(|c| c.n_trees == 1000), || "tree count differs".into())?;
    let mut labels: Vec<String> = grid.iter().map(|c| c.label()).collect();
    labels.sort();
    labels.dedup();
    ensure(labels.len() == 64, || "duplicate configs".into())?;
    Ok("64 distinct configs x 1000 trees".into())
}

// ---------------------------------------------------------------- 5

fn gauss_ln(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

fn random_stochastic(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn random_hmm(k: usize, rng: &mut ChaCha8Rng) -> GaussianHmm {
    GaussianHmm {
        pi: random_stochastic(k, rng),
        trans: (0..k).map(|_| random_stochastic(k, rng)).collect(),
        means: (0..k).map(|_| rng.random_range(-3.0..3.0)).collect(),
        variances: (0..k).map(|_| rng.random_range(0.3..2.0)).collect(),
    }
}

fn all_paths(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|p| (0..k).map(move |s| [p.clone(), vec![s]].concat())).collect();
    }
    out
}

fn joint_ln(m: &GaussianHmm, path: &[usize], obs: &[f64]) -> f64 {
    let mut lp = m.pi[path[0]].ln() + gauss_ln(obs[0], m.means[path[0]], m.variances[path[0]]);
    for t in 1..obs.len() {
        lp += m.trans[path[t - 1]][path[t]].ln() + gauss_ln(obs[t], m.means[path[t]], m.variances[path[t]]);
    }
    lp
}

fn hmm_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for inst in 0..100 {
        let k = 2 + inst % 2;
        let n = rng.random_range(1..=8);
        let m = random_hmm(k, &mut rng);
        let obs: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let joints: Vec<f64> = all_paths(k, n).iter().map(|p| joint_ln(&m, p, &obs)).collect();
        let top = joints.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ll = top + joints.iter().map(|j| (j - top).exp()).sum::<f64>().ln();

        let got_ll = m.log_likelihood(&obs).map_err(|e| e.to_string())?;
        let vit = m.viterbi(&obs).map_err(|e| e.to_string())?;
        let path_val = joint_ln(&m, &vit.states, &obs);
        let err = (got_ll - ll).abs().max((vit.log_prob - top).abs()).max((path_val - top).abs());
        worst = worst.max(err);
        ensure(err <= 1e-8, || format!("instance {inst}: ll {got_ll} vs {ll}, viterbi {} vs {top}", vit.log_prob))?;
    }

    let mut decreases = 0;
    for fit in 0..50u64 {
        let k = 2 + (fit % 2) as usize;
        let truth = random_hmm(k, &mut rng);
        let (_, obs) = truth.sample(150, &mut rng);
        let opts = FitOptions { n_states: k, n_iter: 60, tolerance: 0.0, seed: fit };
        let res = fit_baum_welch(&obs, &opts).map_err(|e| e.to_string())?;
        for w in res.log_likelihoods.windows(2) {
            if w[1] < w[0] - 1e-9 * w[0].abs().max(1.0) {
                decreases += 1;
            }
        }
    }
    ensure(decreases == 0, || format!("{decreases} EM steps decreased the likelihood"))?;
    Ok(format!("100 instances, max abs err {worst:.1e}; 50 EM fits monotone"))
}

// ---------------------------------------------------------------- 6

fn regime_recovery() -> Outcome {
    let start = Instant::now();
    let means = [18.6, 22.3, 26.7, 35.3];
    let stds = [1.2, 1.4, 1.8, 3.0];
    let k = 4;
    let trans: Vec<Vec<f64>> =
        (0..k).map(|i| (0..k).map(|j| if i == j { 0.98 } else { 0.02 / 3.0 }).collect()).collect();
    let truth = GaussianHmm {
        pi: vec![0.25; 4],
        trans,
        means: means.to_vec(),
        variances: stds.iter().map(|s| s * s).collect(),
    };
    let (states, obs) = truth.sample(2000, &mut ChaCha8Rng::seed_from_u64(86));
    let fit = fit_baum_welch(&obs, &FitOptions::default()).map_err(|e| e.to_string())?;
    let model = fit.model.sorted_by_mean();
    for (got, want) in model.means.iter().zip(means) {
        let rel = (got - want).abs() / want;
        ensure(rel <= 0.05, || format!("fitted means {:?}", model.means))?;
    }
    let path = model.viterbi(&obs).map_err(|e| e.to_string())?;
    let hits = path.states.iter().zip(&states).filter(|(a, b)| a == b).count();
    let acc = hits as f64 / states.len() as f64;
    ensure(acc >= 0.95, || format!("Viterbi accuracy {acc:.4}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    let shown: Vec<String> = model.means.iter().map(|m| format!("{m:.2}")).collect();
    Ok(format!("means [{}], accuracy {acc:.4}", shown.join(", ")))
}

// ---------------------------------------------------------------- 7

fn walk_forward() -> Outcome {
    let p = |t, k, s| PlanParams { initial_train: t, test_window: k, step: s };
    let ex = make_plan(600, p(504, 40, 40)).map_err(|e| e.to_string())?;
    ensure(ex.folds.len() == 3, || format!("600/504/40 gave {} folds", ex.folds.len()))?;
    let unit = make_plan(600, p(504, 1, 1)).map_err(|e| e.to_string())?;
    ensure(unit.folds.len() == 96, || format!("step 1 gave {} folds", unit.folds.len()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..2000 {
        let t = rng.random_range(1..300);
        let n = t + rng.random_range(1..500);
        let k = rng.random_range(1..80);
        let s = rng.random_range(1..80);
        let plan = make_plan(n, p(t, k, s)).map_err(|e| e.to_string())?;
        let mut count = 0;
        let mut start = t;
        while start < n {
            count += 1;
            start += s;
        }
        ensure(plan.folds.len() == count, || format!("n={n} t={t} k={k} s={s}: {} folds, expected {count}", plan.folds.len()))?;
        for f in &plan.folds {
            ensure(f.train.end - 1 < f.test.start, || format!("fold {} leaks", f.index))?;
            ensure(f.test.end <= n && f.test.len() <= k, || format!("fold {} overruns", f.index))?;
        }
    }
    Ok("600/504/40 -> 3 folds; step 1 -> n - t; 2000 random plans leak-free".into())
}

// ---------------------------------------------------------------- 8

fn auc_suite() -> Outcome {
    let e = |r: Result<f64, _>| r.map_err(|e: ivnowcast::eval::EvalError| e.to_string());
    let y = [0u8, 0, 1, 1];
    ensure(e(auc(&[0.1, 0.2, 0.8, 0.9], &y))? == 1.0, || "perfect".into())?;
    ensure(e(auc(&[0.9, 0.8, 0.2, 0.1], &y))? == 0.0, || "reversed".into())?;
    ensure(e(auc(&[0.5; 4], &y))? == 0.5, || "ties".into())?;
    // pairs (pos, neg): (0.35>0.1) (0.35<0.4) (0.8>0.1) (0.8>0.4) -> 3/4
    ensure(e(auc(&[0.1, 0.4, 0.35, 0.8], &y))? == 0.75, || "hand-counted case".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..500 {
        let n = rng.random_range(2..60);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let flipped: Vec<u8> = labels.iter().map(|v| 1 - v).collect();
        let sum = e(auc(&scores, &labels))? + e(auc(&scores, &flipped))?;
        ensure((sum - 1.0).abs() < 1e-12, || format!("symmetry sum {sum}"))?;
    }
    Ok("fixed cases exact; symmetry on 500 random instances".into())
}

// ---------------------------------------------------------------- 9

fn dummy_unbiased() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let train: Vec<u8> = (0..504).map(|_| u8::from(rng.random::<f64>() < 0.52)).collect();
    let test: Vec<u8> = (0..100).map(|_| u8::from(rng.random::<f64>() < 0.52)).collect();
    let mut total = 0.0;
    for seed in 0..1000 {
        total += auc(&stratified_dummy(&train, test.len(), seed), &test).map_err(|e| e.to_string())?;
    }
    let mean = total / 1000.0;
    ensure((mean - 0.5).abs() <= 0.02, || format!("mean dummy AUC {mean:.4}"))?;
    Ok(format!("mean AUC {mean:.4} over 1000 seeds"))
}

// ---------------------------------------------------------------- 10 / 11

struct EndToEnd {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
}

fn end_to_end() -> Result<EndToEnd, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let bundle_dir = root.join("bundle");
    let spec = SyntheticSpec { n_stocks: 4, n_days: 660, seed: 11, tweet_intensity: 8.0, ..Default::default() };
    generate(&spec).and_then(|b| b.write(&bundle_dir)).map_err(|e| e.to_string())?;
    let cfg = bundle_dir.join("config.toml");
    let mut text = std::fs::read_to_string(&cfg).map_err(|e| e.to_string())?;
    text.push_str("n_trees = 15\nmax_depth = [4]\nmin_samples_split = [10]\nmin_samples_leaf = [3]\nwrite_matrices = true\nhmm_iter = 30\n");
    std::fs::write(&cfg, text).map_err(|e| e.to_string())?;
    Ok(EndToEnd { _dir: dir, root })
}

fn backtest_into(e2e: &EndToEnd, out: &str, seed: u64) -> Result<std::path::PathBuf, String> {
    let out = e2e.root.join(out);
    let cfg = e2e.root.join("bundle/config.toml");
    let args = [
        "ivnowcast".to_string(),
        "--config".into(),
        cfg.display().to_string(),
        "--seed".into(),
        seed.to_string(),
        "--out".into(),
        out.display().to_string(),
        "backtest".into(),
    ];
    let code = ivnowcast::cli::main_with(args);
    ensure(code == 0, || format!("backtest exited with {code}"))?;
    Ok(out)
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn csv_column(bytes: &[u8], name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_reader(bytes);
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

fn determinism(e2e: &EndToEnd) -> Outcome {
    let a = files(&backtest_into(e2e, "run_a", 42)?);
    let b = files(&backtest_into(e2e, "run_b", 42)?);
    ensure(a.keys().eq(b.keys()), || "different file sets".into())?;
    for (name, bytes) in &a {
        ensure(&b[name] == bytes, || format!("{name} differs between identical runs"))?;
    }
    let c = files(&backtest_into(e2e, "run_c", 43)?);
    for (name, bytes) in &a {
        if name.starts_with("matrices") {
            ensure(&c[name] == bytes, || format!("{name} changed with the seed"))?;
        }
    }
    let spans = ["symbol", "scenario", "fold", "train_start", "train_end", "test_start", "test_end"];
    for col in spans {
        ensure(csv_column(&a["folds.csv"], col) == csv_column(&c["folds.csv"], col), || format!("folds.csv {col} changed"))?;
    }
    ensure(
        csv_column(&a["predictions.csv"], "dummy") != csv_column(&c["predictions.csv"], "dummy"),
        || "dummy scores did not change with the seed".into(),
    )?;
    Ok(format!("{} files byte-identical; seed change moves dummy only", a.len()))
}

fn scenario_structure(e2e: &EndToEnd) -> Outcome {
    let expected = [2usize, 8, 3, 9, 6, 5, 11];
    for (i, &n) in expected.iter().enumerate() {
        let sc = ScenarioId::new(i as u8 + 1).unwrap();
        ensure(sc.features().len() == n, || format!("S{} has {} features", i + 1, sc.features().len()))?;
    }
    let out = e2e.root.join("run_a");
    for entry in std::fs::read_dir(out.join("matrices")).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        let name = p.file_stem().unwrap().to_string_lossy().to_string();
        let sc: usize = name.rsplit("_S").next().unwrap().parse().map_err(|_| name.clone())?;
        let mut r = csv::Reader::from_path(&p).map_err(|e| e.to_string())?;
        let cols = r.headers().map_err(|e| e.to_string())?.len();
        // date and target columns accompany the features
        ensure(cols - 2 == expected[sc - 1], || format!("{name}: {} feature columns", cols - 2))?;
    }

    let report = ivnowcast::report::read_summary(&out.join("summary.json")).map_err(|e| e.to_string())?;
    for sc in report.scenario_ids() {
        ensure(!report.sector_improvements(sc).is_empty(), || format!("no sector rollup for {sc}"))?;
    }
    let regimes = report.regimes.as_ref().ok_or("no regime rollup")?;
    ensure(!regimes.summary.is_empty() && !regimes.by_sector.is_empty(), || "empty regime tables".into())?;
    for s in &report.stocks {
        let r = s.scenario(regimes.scenario).ok_or("regime scenario missing")?;
        let test_days: usize = r.folds.iter().map(|f| f.n_test).sum();
        let counted: usize = regimes.per_stock.iter().filter(|row| row.symbol == s.symbol).map(|row| row.days).sum();
        ensure(counted == test_days, || format!("{}: regime days {counted} vs test days {test_days}", s.symbol))?;
    }
    Ok("column counts {2,8,3,9,6,5,11}; sector and regime rollups partition test days".into())
}

// ----------------------------------------------------------------

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match &res {
        Ok(detail) => println!("[PASS] {id:>2} {name} ({secs:.2}s): {detail}"),
        Err(why) => println!("[FAIL] {id:>2} {name} ({secs:.2}s): {why}"),
    }
    res.is_ok()
}

fn main() {
    let mut ok = true;
    ok &= run(1, "vix oracle", vix_oracle);
    ok &= run(2, "cart oracle", cart_oracle);
    ok &= run(3, "forest null/signal", forest_null_signal);
    ok &= run(4, "grid shape", grid_shape);
    ok &= run(5, "hmm correctness", hmm_correctness);
    ok &= run(6, "regime recovery", regime_recovery);
    ok &= run(7, "walk-forward integrity", walk_forward);
    ok &= run(8, "auc suite", auc_suite);
    ok &= run(9, "stratified dummy", dummy_unbiased);
    match end_to_end() {
        Ok(e2e) => {
            ok &= run(10, "end-to-end determinism", || determinism(&e2e));
            ok &= run(11, "scenario structure", || scenario_structure(&e2e));
        }
        Err(why) => {
            println!("[FAIL] 10 end-to-end determinism: setup failed: {why}");
            println!("[FAIL] 11 scenario structure: setup failed: {why}");
            ok = false;
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
