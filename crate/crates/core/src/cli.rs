//! Command-line front end. The binary only forwards to [`main_with`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::features::ScenarioId;
use crate::hmm::{FitOptions, RegimePath};
use crate::io;
use crate::pipeline::{self, write_err, RunError};
use crate::report;
use crate::synth::{self, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "ivnowcast", version, about = "Implied volatility direction nowcasting")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the 30-day IV index from option chains.
    Iv(IvArgs),
    /// Write feature matrices per stock and scenario.
    Featurize(FeaturizeArgs),
    /// Walk-forward ablation with regime and liquidity rollups.
    Backtest,
    /// Fit regime HMMs and decode regime paths.
    Regimes(RegimesArgs),
    /// Re-render report tables from a summary.json.
    Report(ReportArgs),
    /// Generate a synthetic data bundle.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IvArgs {
    /// Option chain CSV; defaults to the config's `chains`.
    pub chains: Option<PathBuf>,
    #[arg(long)]
    pub rates: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Scenarios to build; defaults to the config's list.
    #[arg(long = "scenario")]
    pub scenarios: Vec<u8>,
}

#[derive(Debug, Args)]
pub struct RegimesArgs {
    /// `symbol,date,iv` CSV; defaults to the config's IV source.
    pub iv: Option<PathBuf>,
    /// Last training date; defaults to the config value or the last date.
    #[arg(long)]
    pub train_end: Option<NaiveDate>,
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary written by `backtest`.
    pub summary: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic spec (TOML); defaults apply to missing keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub stocks: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub signal: Option<f64>,
    /// Also write option chains.
    #[arg(long)]
    pub chains: bool,
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Config(ConfigError::Invalid(vec![format!("threads: {e}")])))?;
    pool.install(|| dispatch(&cli))
}

fn load_config(cli: &Cli, required: bool) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if required => return Err(ConfigError::Invalid(vec!["--config is required".into()]).into()),
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<(), RunError> {
    match &cli.command {
        Command::Iv(a) => cmd_iv(cli, a),
        Command::Featurize(a) => cmd_featurize(cli, a),
        Command::Backtest => cmd_backtest(cli),
        Command::Regimes(a) => cmd_regimes(cli, a),
        Command::Report(a) => cmd_report(cli, a),
        Command::Synth(a) => cmd_synth(cli, a),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(write_err(dir))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(write_err(path))
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> RunError + '_ {
    move |e| RunError::Write { path: path.display().to_string(), source: e.into() }
}

pub fn cmd_iv(cli: &Cli, args: &IvArgs) -> Result<(), RunError> {
    let cfg = load_config(cli, false)?;
    let chains = args
        .chains
        .clone()
        .or(cfg.chains.clone())
        .ok_or_else(|| ConfigError::Invalid(vec!["no chain file given".into()]))?;
    let rates = match args.rates.as_ref().or(cfg.rates.as_ref()) {
        Some(p) => io::read_rates(p)?,
        None => io::RateCurve::default(),
    };
    let series = pipeline::iv_from_chains(io::read_chains(&chains)?, &rates)?;
    match &cli.out {
        Some(path) => {
            io::write_iv(create(path)?, &series).map_err(csv_err(path))?;
            eprintln!("wrote {}", path.display());
        }
        None => io::write_iv(std::io::stdout().lock(), &series).map_err(csv_err(Path::new("<stdout>")))?,
    }
    Ok(())
}

pub fn cmd_featurize(cli: &Cli, args: &FeaturizeArgs) -> Result<(), RunError> {
    let mut cfg = load_config(cli, true)?;
    if !args.scenarios.is_empty() {
        cfg.scenarios = args.scenarios.clone();
    }
    cfg.regimes = false;
    cfg.validate()?;
    let stocks = pipeline::load_stocks(&cfg)?;
    let dir = cfg.out.join("matrices");
    write_matrices(&dir, &pipeline::feature_matrices(&stocks, &cfg.scenario_ids())?)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn write_matrices(
    dir: &Path,
    matrices: &BTreeMap<(String, ScenarioId), crate::features::FeatureMatrix>,
) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    for ((symbol, sc), m) in matrices {
        let path = dir.join(format!("{symbol}_{sc}.csv"));
        m.write_csv(create(&path)?).map_err(csv_err(&path))?;
    }
    Ok(())
}

fn write_regimes(dir: &Path, fits: &pipeline::RegimeFits) -> Result<(), RunError> {
    let models = dir.join("hmm");
    fs::create_dir_all(&models).map_err(write_err(&models))?;
    for (symbol, (artifact, _)) in fits {
        let path = models.join(format!("{symbol}.json"));
        let json = serde_json::to_string_pretty(artifact).expect("artifact serializes") + "\n";
        fs::write(&path, json).map_err(write_err(&path))?;
    }
    let paths: BTreeMap<String, RegimePath> = fits.iter().map(|(k, (_, p))| (k.clone(), p.clone())).collect();
    let path = dir.join("regimes.csv");
    let mut w = create(&path)?;
    io::write_regime_paths(&mut w, &paths).map_err(csv_err(&path))?;
    w.flush().map_err(write_err(&path))
}

pub fn cmd_backtest(cli: &Cli) -> Result<(), RunError> {
    let cfg = load_config(cli, true)?;
    cfg.validate()?;
    let stocks = pipeline::load_stocks(&cfg)?;
    if cfg.write_matrices {
        write_matrices(&cfg.out.join("matrices"), &pipeline::feature_matrices(&stocks, &cfg.scenario_ids())?)?;
    }
    let run = pipeline::backtest(&cfg, &stocks)?;
    report::write_report(&run.report, &cfg.out)?;
    if !run.regimes.is_empty() {
        write_regimes(&cfg.out.join("regimes"), &run.regimes)?;
    }
    for s in run.report.scenario_summary() {
        println!(
            "{}\t{:<40}\tmedian AUC {}\tdummy {}\timprovement {}",
            s.scenario,
            s.sources,
            fmt(s.median_auc),
            fmt(s.median_dummy_auc),
            fmt(s.median_improvement)
        );
    }
    eprintln!("wrote {}", cfg.out.display());
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

pub fn cmd_regimes(cli: &Cli, args: &RegimesArgs) -> Result<(), RunError> {
    let cfg = load_config(cli, false)?;
    let series = match (&args.iv, &cfg.iv, &cfg.chains) {
        (Some(p), _, _) | (None, Some(p), _) => io::read_iv(p)?,
        (None, None, Some(c)) => {
            let rates = match &cfg.rates {
                Some(p) => io::read_rates(p)?,
                None => io::RateCurve::default(),
            };
            pipeline::iv_from_chains(io::read_chains(c)?, &rates)?
        }
        (None, None, None) => return Err(ConfigError::Invalid(vec!["no IV series given".into()]).into()),
    };
    let opts = FitOptions {
        n_states: args.states.unwrap_or(cfg.hmm_states),
        n_iter: args.iter.unwrap_or(cfg.hmm_iter),
        tolerance: cfg.hmm_tolerance,
        seed: cfg.seed,
    };
    let stocks: Vec<crate::eval::StockData> = series
        .into_iter()
        .map(|(symbol, iv)| crate::eval::StockData {
            symbol,
            sector: String::new(),
            prices: Vec::new(),
            iv,
            social: Vec::new(),
            liquidity: None,
        })
        .collect();
    let end = args.train_end.or(cfg.hmm_train_end);
    let train_end: BTreeMap<String, NaiveDate> = match end {
        Some(d) => stocks.iter().map(|s| (s.symbol.clone(), d)).collect(),
        None => BTreeMap::new(),
    };
    let fits = pipeline::fit_regimes(&stocks, &train_end, &opts)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("regimes"));
    write_regimes(&dir, &fits)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

pub fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<(), RunError> {
    let rep = report::read_summary(&args.summary)?;
    let dir = match &cli.out {
        Some(d) => d.clone(),
        None => args.summary.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    report::write_tables(&rep, &dir)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}

pub fn cmd_synth(cli: &Cli, args: &SynthArgs) -> Result<(), RunError> {
    let mut spec = match &args.spec {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|source| io::InputError::Open { path: p.display().to_string(), source })?;
            toml::from_str::<SyntheticSpec>(&text)
                .map_err(|e| ConfigError::Parse { path: p.display().to_string(), msg: e.to_string() })?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(n) = args.stocks {
        spec.n_stocks = n;
    }
    if let Some(n) = args.days {
        spec.n_days = n;
    }
    if let Some(s) = args.signal {
        spec.signal_strength = s;
    }
    if args.chains {
        spec.with_chains = true;
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
    synth::generate(&spec)?.write(&dir)?;
    eprintln!("wrote {}", dir.display());
    Ok(())
}
