//! Gaussian-emission hidden Markov model over daily IV levels.
//!
//! All recursions run in log space. Fitted states are mapped to ordinal
//! regimes by ascending emission mean, so the labels do not depend on the
//! internal state numbering EM happens to converge to.

use std::f64::consts::PI;
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_STATES: usize = 4;
pub const N_ITER: usize = 100;
pub const TOLERANCE: f64 = 1e-6;
pub const VARIANCE_FLOOR: f64 = 1e-6;
pub const DEFAULT_SEED: u64 = 42;
const SELF_TRANSITION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("DegenerateModel: {0}")]
    DegenerateModel(String),
    #[error("TooFewObservations: need more than {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("observation sequence is empty")]
    EmptyObservations,
    #[error("non-finite observation at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianHmm {
    pub pi: Vec<f64>,
    /// Row-stochastic, `trans[i][j]` = P(next = j | current = i).
    pub trans: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-time state posteriors and expected transition counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    pub gamma: Vec<Vec<f64>>,
    /// Σ_t ξ_t(i, j) over all transitions.
    pub xi_sum: Vec<Vec<f64>>,
    pub log_likelihood: f64,
}

/// Most probable hidden path.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub states: Vec<usize>,
    pub log_prob: f64,
}

impl GaussianHmm {
    pub fn n_states(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<(), HmmError> {
        let k = self.n_states();
        if k == 0 {
            return Err(HmmError::DegenerateModel("no states".into()));
        }
        if self.pi.len() != k || self.variances.len() != k || self.trans.len() != k || self.trans.iter().any(|r| r.len() != k) {
            return Err(HmmError::DegenerateModel("parameter shapes disagree".into()));
        }
        if let Some(v) = self.variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(HmmError::DegenerateModel(format!("variance {v} is not positive")));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(HmmError::DegenerateModel("non-finite mean".into()));
        }
        Ok(())
    }

    pub fn log_emission(&self, state: usize, x: f64) -> f64 {
        let v = self.variances[state];
        let d = x - self.means[state];
        -0.5 * ((2.0 * PI * v).ln() + d * d / v)
    }

    fn check(&self, obs: &[f64]) -> Result<(), HmmError> {
        self.validate()?;
        if obs.is_empty() {
            return Err(HmmError::EmptyObservations);
        }
        if let Some(i) = obs.iter().position(|x| !x.is_finite()) {
            return Err(HmmError::NonFinite(i));
        }
        Ok(())
    }

    fn log_alpha(&self, obs: &[f64]) -> Vec<Vec<f64>> {
        let k = self.n_states();
        let log_a: Vec<Vec<f64>> = self.trans.iter().map(|r| r.iter().map(|&p| ln(p)).collect()).collect();
        let mut alpha = Vec::with_capacity(obs.len());
        alpha.push((0..k).map(|j| ln(self.pi[j]) + self.log_emission(j, obs[0])).collect::<Vec<_>>());
        for &x in &obs[1..] {
            let prev = alpha.last().unwrap();
            let next = (0..k)
                .map(|j| log_sum_exp((0..k).map(|i| prev[i] + log_a[i][j])) + self.log_emission(j, x))
                .collect();
            alpha.push(next);
        }
        alpha
    }

    fn log_beta(&self, obs: &[f64]) -> Vec<Vec<f64>> {
        let k = self.n_states();
        let n = obs.len();
        let log_a: Vec<Vec<f64>> = self.trans.iter().map(|r| r.iter().map(|&p| ln(p)).collect()).collect();
        let mut beta = vec![vec![0.0; k]; n];
        for t in (0..n - 1).rev() {
            for i in 0..k {
                beta[t][i] = log_sum_exp((0..k).map(|j| log_a[i][j] + self.log_emission(j, obs[t + 1]) + beta[t + 1][j]));
            }
        }
        beta
    }

    /// Log P(observations | model) by the forward recursion.
    pub fn log_likelihood(&self, obs: &[f64]) -> Result<f64, HmmError> {
        self.check(obs)?;
        let alpha = self.log_alpha(obs);
        Ok(log_sum_exp(alpha.last().unwrap().iter().copied()))
    }

    /// Forward-backward posteriors.
    pub fn posteriors(&self, obs: &[f64]) -> Result<Posteriors, HmmError> {
        self.check(obs)?;
        let k = self.n_states();
        let alpha = self.log_alpha(obs);
        let beta = self.log_beta(obs);
        let ll = log_sum_exp(alpha.last().unwrap().iter().copied());
        if !ll.is_finite() {
            return Err(HmmError::DegenerateModel("zero-probability observation sequence".into()));
        }

        let gamma: Vec<Vec<f64>> = alpha
            .iter()
            .zip(&beta)
            .map(|(a, b)| {
                let row: Vec<f64> = (0..k).map(|i| (a[i] + b[i] - ll).exp()).collect();
                let s: f64 = row.iter().sum();
                row.into_iter().map(|g| g / s).collect()
            })
            .collect();

        let log_a: Vec<Vec<f64>> = self.trans.iter().map(|r| r.iter().map(|&p| ln(p)).collect()).collect();
        let mut xi_sum = vec![vec![0.0; k]; k];
        for t in 0..obs.len() - 1 {
            for i in 0..k {
                for j in 0..k {
                    let lx = alpha[t][i] + log_a[i][j] + self.log_emission(j, obs[t + 1]) + beta[t + 1][j] - ll;
                    xi_sum[i][j] += lx.exp();
                }
            }
        }
        Ok(Posteriors { gamma, xi_sum, log_likelihood: ll })
    }

    /// Max-probability state sequence; ties go to the lower state index.
    pub fn viterbi(&self, obs: &[f64]) -> Result<StatePath, HmmError> {
        self.check(obs)?;
        let k = self.n_states();
        let n = obs.len();
        let log_a: Vec<Vec<f64>> = self.trans.iter().map(|r| r.iter().map(|&p| ln(p)).collect()).collect();
        let mut delta: Vec<f64> = (0..k).map(|j| ln(self.pi[j]) + self.log_emission(j, obs[0])).collect();
        let mut back = vec![vec![0usize; k]; n];
        for t in 1..n {
            let mut next = vec![f64::NEG_INFINITY; k];
            for j in 0..k {
                let mut best = (0, f64::NEG_INFINITY);
                for (i, d) in delta.iter().enumerate() {
                    let s = d + log_a[i][j];
                    if s > best.1 {
                        best = (i, s);
                    }
                }
                back[t][j] = best.0;
                next[j] = best.1 + self.log_emission(j, obs[t]);
            }
            delta = next;
        }
        let mut last = 0;
        for j in 1..k {
            if delta[j] > delta[last] {
                last = j;
            }
        }
        let log_prob = delta[last];
        let mut states = vec![0; n];
        states[n - 1] = last;
        for t in (1..n).rev() {
            states[t - 1] = back[t][states[t]];
        }
        Ok(StatePath { states, log_prob })
    }

    /// Log joint probability of a given state path and the observations.
    pub fn path_log_prob(&self, states: &[usize], obs: &[f64]) -> f64 {
        let mut lp = ln(self.pi[states[0]]) + self.log_emission(states[0], obs[0]);
        for t in 1..obs.len() {
            lp += ln(self.trans[states[t - 1]][states[t]]) + self.log_emission(states[t], obs[t]);
        }
        lp
    }

    /// `rank[state]` = ordinal of the state's mean (0 = lowest).
    pub fn ordinal_ranks(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_states()).collect();
        order.sort_by(|&a, &b| self.means[a].total_cmp(&self.means[b]).then(a.cmp(&b)));
        let mut rank = vec![0; order.len()];
        for (r, &s) in order.iter().enumerate() {
            rank[s] = r;
        }
        rank
    }

    /// Same model with states reordered by ascending mean.
    pub fn sorted_by_mean(&self) -> GaussianHmm {
        let rank = self.ordinal_ranks();
        let k = self.n_states();
        let mut inv = vec![0; k];
        for (s, &r) in rank.iter().enumerate() {
            inv[r] = s;
        }
        GaussianHmm {
            pi: inv.iter().map(|&s| self.pi[s]).collect(),
            trans: inv.iter().map(|&i| inv.iter().map(|&j| self.trans[i][j]).collect()).collect(),
            means: inv.iter().map(|&s| self.means[s]).collect(),
            variances: inv.iter().map(|&s| self.variances[s]).collect(),
        }
    }

    /// Draws a state path and observations.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<usize>, Vec<f64>) {
        use rand_distr::{Distribution, Normal};
        let draw = |p: &[f64], rng: &mut R| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        };
        let mut states = Vec::with_capacity(n);
        let mut obs = Vec::with_capacity(n);
        let mut s = draw(&self.pi, rng);
        for t in 0..n {
            if t > 0 {
                s = draw(&self.trans[s], rng);
            }
            let normal = Normal::new(self.means[s], self.variances[s].sqrt()).expect("valid variance");
            states.push(s);
            obs.push(normal.sample(rng));
        }
        (states, obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_states: usize,
    pub n_iter: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n_states: N_STATES, n_iter: N_ITER, tolerance: TOLERANCE, seed: DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: GaussianHmm,
    /// Log-likelihood under the parameters entering each EM iteration.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Starting point for EM: means at the (2k+1)/(2K) observation quantiles,
/// every variance at the sample variance, uniform start distribution and
/// 0.9 self-transition mass. Coinciding quantile means get a seeded jitter.
pub fn initial_model(obs: &[f64], n_states: usize, seed: u64) -> GaussianHmm {
    let k = n_states;
    let mut sorted = obs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = obs.len() as f64;
    let mean = obs.iter().sum::<f64>() / n;
    let var = (obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).max(VARIANCE_FLOOR);
    let mut means: Vec<f64> = (0..k).map(|i| quantile(&sorted, (2 * i + 1) as f64 / (2 * k) as f64)).collect();
    if means.windows(2).any(|w| w[0] == w[1]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = var.sqrt();
        for m in means.iter_mut() {
            *m += 1e-3 * sd * (rng.random::<f64>() - 0.5);
        }
    }
    let trans = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| match (k, i == j) {
                    (1, _) => 1.0,
                    (_, true) => SELF_TRANSITION,
                    (_, false) => (1.0 - SELF_TRANSITION) / (k - 1) as f64,
                })
                .collect()
        })
        .collect();
    GaussianHmm { pi: vec![1.0 / k as f64; k], trans, means, variances: vec![var; k] }
}

/// Baum-Welch re-estimation starting from [`initial_model`].
pub fn fit_baum_welch(obs: &[f64], opts: &FitOptions) -> Result<FitResult, HmmError> {
    if opts.n_states == 0 {
        return Err(HmmError::DegenerateModel("n_states must be >= 1".into()));
    }
    if obs.len() <= opts.n_states {
        return Err(HmmError::TooFewObservations { need: opts.n_states, got: obs.len() });
    }
    if let Some(i) = obs.iter().position(|x| !x.is_finite()) {
        return Err(HmmError::NonFinite(i));
    }
    let model = initial_model(obs, opts.n_states, opts.seed);
    fit_from(model, obs, opts)
}

/// Baum-Welch from an explicit starting model.
pub fn fit_from(mut model: GaussianHmm, obs: &[f64], opts: &FitOptions) -> Result<FitResult, HmmError> {
    let k = model.n_states();
    let mut lls = Vec::new();
    let mut converged = false;
    for _ in 0..opts.n_iter {
        let post = model.posteriors(obs)?;
        let ll = post.log_likelihood;
        if let Some(&prev) = lls.last() {
            if ll - prev < opts.tolerance {
                lls.push(ll);
                converged = true;
                break;
            }
        }
        lls.push(ll);

        let g = &post.gamma;
        model.pi = g[0].clone();
        for i in 0..k {
            let denom: f64 = post.xi_sum[i].iter().sum();
            if denom > 0.0 {
                model.trans[i] = post.xi_sum[i].iter().map(|x| x / denom).collect();
            }
            let w: f64 = g.iter().map(|row| row[i]).sum();
            if w > 0.0 {
                let mu = g.iter().zip(obs).map(|(row, x)| row[i] * x).sum::<f64>() / w;
                let var = g.iter().zip(obs).map(|(row, x)| row[i] * (x - mu).powi(2)).sum::<f64>() / w;
                model.means[i] = mu;
                model.variances[i] = var.max(VARIANCE_FLOOR);
            }
        }
    }
    Ok(FitResult { model, log_likelihoods: lls, converged })
}

/// Ordinal IV regime; 0 is the lowest-mean state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Regime(pub usize);

impl Regime {
    pub fn name(self, n_states: usize) -> String {
        if n_states == 4 {
            ["low", "medium", "high", "very_high"][self.0].to_string()
        } else {
            format!("regime_{}", self.0)
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "low" => Some(Regime(0)),
            "medium" => Some(Regime(1)),
            "high" => Some(Regime(2)),
            "very_high" => Some(Regime(3)),
            other => other.strip_prefix("regime_")?.parse().ok().map(Regime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePath {
    pub n_states: usize,
    pub dates: Vec<NaiveDate>,
    pub regimes: Vec<Regime>,
    pub in_sample: Vec<bool>,
    /// IV value observed on each date.
    pub iv: Vec<f64>,
}

impl RegimePath {
    pub fn regime_on(&self, date: NaiveDate) -> Option<Regime> {
        self.dates.binary_search(&date).ok().map(|i| self.regimes[i])
    }
}

/// Viterbi-decodes the whole series and maps states to ordinals.
pub fn assign_regimes(
    model: &GaussianHmm,
    dates: &[NaiveDate],
    iv: &[f64],
    train_end: NaiveDate,
) -> Result<RegimePath, HmmError> {
    let path = model.viterbi(iv)?;
    let rank = model.ordinal_ranks();
    Ok(RegimePath {
        n_states: model.n_states(),
        dates: dates.to_vec(),
        regimes: path.states.iter().map(|&s| Regime(rank[s])).collect(),
        in_sample: dates.iter().map(|d| *d <= train_end).collect(),
        iv: iv.to_vec(),
    })
}

/// Persisted regime model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmArtifact {
    pub symbol: String,
    pub n_states: usize,
    pub n_iter: usize,
    pub seed: u64,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub n_train: usize,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// States sorted by ascending mean.
    pub pi: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl HmmArtifact {
    pub fn model(&self) -> GaussianHmm {
        GaussianHmm {
            pi: self.pi.clone(),
            trans: self.trans.clone(),
            means: self.means.clone(),
            variances: self.variances.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), HmmError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HmmError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Fits on observations dated on or before `train_end`, then decodes the
/// full series out of sample.
pub fn fit_and_assign(
    symbol: &str,
    dates: &[NaiveDate],
    iv: &[f64],
    train_end: NaiveDate,
    opts: &FitOptions,
) -> Result<(HmmArtifact, RegimePath), HmmError> {
    let n_train = dates.partition_point(|d| *d <= train_end);
    if n_train <= opts.n_states {
        return Err(HmmError::TooFewObservations { need: opts.n_states, got: n_train });
    }
    let fit = fit_baum_welch(&iv[..n_train], opts)?;
    let model = fit.model.sorted_by_mean();
    let path = assign_regimes(&model, dates, iv, train_end)?;
    let artifact = HmmArtifact {
        symbol: symbol.to_string(),
        n_states: opts.n_states,
        n_iter: opts.n_iter,
        seed: opts.seed,
        train_start: dates[0],
        train_end,
        n_train,
        converged: fit.converged,
        iterations: fit.log_likelihoods.len(),
        log_likelihood: *fit.log_likelihoods.last().unwrap(),
        pi: model.pi,
        trans: model.trans,
        means: model.means,
        variances: model.variances,
    };
    Ok((artifact, path))
}
