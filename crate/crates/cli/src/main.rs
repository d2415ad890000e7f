//! `midiv`: simulate multiple-instance data, evaluate bag classifiers and
//! rerun the simulation study.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use midiv_core::classify::{CklOrientation, Estimator, Method, ThresholdPolicy};
use midiv_core::simulate::Scenario;
use midiv_core::Integrator;

#[derive(Debug, Parser)]
#[command(name = "midiv", version, about = "Bag-to-class divergence classification for multiple-instance data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate train/test bags from a simulation scenario.
    Simulate(SimulateArgs),
    /// Fit on training bags and score test bags, or cross-validate.
    Evaluate(EvaluateArgs),
    /// Mean AUC over the simulation grid, next to the published values.
    Table1(Table1Args),
    /// Repeat a recorded run and check its outputs byte for byte.
    Replay(ReplayArgs),
}

impl Command {
    fn out_dir_mut(&mut self) -> Option<&mut PathBuf> {
        match self {
            Command::Simulate(a) => Some(&mut a.out_dir),
            Command::Evaluate(a) => Some(&mut a.out_dir),
            Command::Table1(a) => Some(&mut a.out_dir),
            Command::Replay(_) => None,
        }
    }
}

fn parse_with<T: std::str::FromStr<Err = midiv_core::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: midiv_core::Error| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    parse_with(s)
}

fn parse_method(s: &str) -> Result<Method, String> {
    parse_with(s)
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    parse_with(s)
}

fn parse_threshold(s: &str) -> Result<ThresholdPolicy, String> {
    parse_with(s)
}

fn parse_orientation(s: &str) -> Result<CklOrientation, String> {
    parse_with(s)
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let mut pos = None;
    let mut neg = None;
    for part in s.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("cell must look like pos=1,neg=5, got {s:?}"))?;
        let v: usize = v.trim().parse().map_err(|_| format!("bad count {v:?} in cell {s:?}"))?;
        match k.trim() {
            "pos" => pos = Some(v),
            "neg" => neg = Some(v),
            other => return Err(format!("unknown cell key {other:?}")),
        }
    }
    match (pos, neg) {
        (Some(p), Some(n)) if p > 0 && n > 0 => Ok((p, n)),
        _ => Err(format!("cell needs positive pos and neg counts, got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Importance,
    Riemann,
}

impl From<IntegratorArg> for Integrator {
    fn from(a: IntegratorArg) -> Self {
        match a {
            IntegratorArg::Importance => Integrator::Importance,
            IntegratorArg::Riemann => Integrator::Riemann,
        }
    }
}

/// Options shared by commands that compute divergences.
#[derive(Debug, Clone, Args)]
pub struct DivergenceArgs {
    /// kde-epan, kde-gauss or gmm-aic
    #[arg(long, default_value = "kde-epan", value_parser = parse_estimator)]
    pub estimator: Estimator,
    #[arg(long, value_enum, default_value = "importance")]
    pub integrator: IntegratorArg,
    /// Importance samples per divergence.
    #[arg(long, default_value_t = 1000)]
    pub n_imp: usize,
    /// Riemann grid resolution.
    #[arg(long, default_value_t = 4096)]
    pub grid_points: usize,
    /// Cap on density ratios.
    #[arg(long, default_value_t = 1e6)]
    pub ratio_clip: f64,
    /// Reference class of the cKL score: neg or pos.
    #[arg(long, default_value = "neg", value_parser = parse_orientation)]
    pub ckl_orientation: CklOrientation,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// sim1 .. sim6, or custom together with --config
    #[arg(long, default_value = "sim1", value_parser = parse_scenario)]
    pub scenario: Scenario,
    /// JSON simulation config; overrides --scenario.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Positive training bags.
    #[arg(long, default_value_t = 5)]
    pub pos: usize,
    /// Negative training bags.
    #[arg(long, default_value_t = 10)]
    pub neg: usize,
    /// Test bags, half of them positive.
    #[arg(long, default_value_t = 100)]
    pub test: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Training bags (BAG_CSV).
    #[arg(long)]
    pub train: PathBuf,
    /// Test bags (BAG_CSV); omit when cross-validating.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// rd-kl, rd-bh, ckl, b2b-kl, b2b-bh or svm-divs
    #[arg(long, default_value = "ckl", value_parser = parse_method)]
    pub method: Method,
    /// Divergence fed to the SVM: rd-kl, rd-bh or ckl
    #[arg(long, default_value = "ckl", value_parser = parse_method)]
    pub svm_feature: Method,
    /// loocv or fixed:<t>
    #[arg(long, default_value = "loocv", value_parser = parse_threshold)]
    pub threshold: ThresholdPolicy,
    /// Cross-validate the training bags with this many folds.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Project onto this many principal components first.
    #[arg(long)]
    pub pca: Option<usize>,
    #[command(flatten)]
    pub divergence: DivergenceArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    /// sim1 .. sim6
    #[arg(long, default_value = "sim1", value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Restrict to cells such as pos=1,neg=5 (repeatable).
    #[arg(long = "cell", value_parser = parse_cell)]
    pub cells: Vec<(usize, usize)>,
    /// Test bags per repetition.
    #[arg(long, default_value_t = 100)]
    pub test: usize,
    #[command(flatten)]
    pub divergence: DivergenceArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// manifest.json written by an earlier run.
    pub manifest: PathBuf,
    /// Write the repeated outputs here instead of the recorded directory.
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli, argv[1..].to_vec()) {
        Ok(code) => code,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
