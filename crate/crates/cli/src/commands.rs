use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::Parser;
use midiv_core::classify::{
    cross_validate, evaluate, published_auc, run_sim_study, Method, PipelineConfig, SimStudy, StudyOptions,
    TABLE1_GRID,
};
use midiv_core::simulate::{sample_experiment_detailed, GeneratedBag, Latent, Scenario, SimConfig};
use midiv_core::{load_dataset, save_dataset, DivergenceSpec, Label};
use serde::Serialize;

use crate::manifest::{FileDigest, RunManifest};
use crate::{Cli, Command, DivergenceArgs, EvaluateArgs, ReplayArgs, SimulateArgs, Table1Args};

pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<midiv_core::Error> for Failure {
    fn from(e: midiv_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome<T> = Result<T, Failure>;

const THREADS_VAR: &str = "MIDIV_THREADS";

fn configure_threads() -> Outcome<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    // A pool may already exist when commands run in-process (replay).
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

pub fn run(cli: Cli, args: Vec<String>) -> Outcome<ExitCode> {
    let threads = configure_threads()?;
    match cli.command {
        Command::Replay(a) => replay(&a),
        command => {
            let manifest = execute(command, args, threads)?;
            for out in &manifest.outputs {
                println!("wrote {}", out.path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn execute(command: Command, args: Vec<String>, threads: Option<usize>) -> Outcome<RunManifest> {
    let started = Instant::now();
    let run = match &command {
        Command::Simulate(a) => simulate(a)?,
        Command::Evaluate(a) => evaluate_cmd(a)?,
        Command::Table1(a) => table1(a)?,
        Command::Replay(_) => return Err(Failure::Usage("a manifest cannot record a replay".into())),
    };
    let out_dir = match &command {
        Command::Simulate(a) => &a.out_dir,
        Command::Evaluate(a) => &a.out_dir,
        Command::Table1(a) => &a.out_dir,
        Command::Replay(_) => unreachable!(),
    };
    let manifest = RunManifest {
        tool: "midiv".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: args,
        config: run.config,
        seed: run.seed,
        threads,
        inputs: run.inputs.iter().map(|p| FileDigest::of(p)).collect::<anyhow::Result<_>>()?,
        outputs: run.outputs.iter().map(|p| FileDigest::of(p)).collect::<anyhow::Result<_>>()?,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}

struct RunRecord {
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn prepare_dir(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("{}: cannot create output directory", dir.display()))
        .map_err(Failure::Runtime)
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text)
        .with_context(|| format!("{}: cannot write", path.display()))
        .map_err(Failure::Runtime)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    write_text(path, &(text + "\n"))
}

fn spec_from(args: &DivergenceArgs) -> DivergenceSpec {
    DivergenceSpec {
        integrator: args.integrator.into(),
        n_imp: args.n_imp,
        grid_points: args.grid_points,
        ratio_clip: args.ratio_clip,
        ..DivergenceSpec::default()
    }
}

#[derive(Serialize)]
struct LatentRecord<'a> {
    bag_id: &'a str,
    split: &'static str,
    true_label: Label,
    seed: u64,
    latent: &'a Latent,
}

fn latent_records<'a>(bags: &'a [GeneratedBag], split: &'static str) -> impl Iterator<Item = LatentRecord<'a>> {
    bags.iter().map(move |g| LatentRecord {
        bag_id: g.bag.id(),
        split,
        true_label: g.true_label,
        seed: g.seed,
        latent: &g.latent,
    })
}

fn simulate(a: &SimulateArgs) -> Outcome<RunRecord> {
    if a.pos == 0 || a.neg == 0 || a.test == 0 {
        return Err(Failure::Usage("--pos, --neg and --test must be at least 1".into()));
    }
    let mut inputs = Vec::new();
    let config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("{}: cannot read config", path.display()))?;
            inputs.push(path.clone());
            serde_json::from_str::<SimConfig>(&text).with_context(|| format!("{}: invalid simulation config", path.display()))?
        }
        None if a.scenario == Scenario::Custom => {
            return Err(Failure::Usage("--scenario custom needs --config <file>".into()));
        }
        None => SimConfig::preset(a.scenario),
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    prepare_dir(&a.out_dir)?;
    let exp = sample_experiment_detailed(&config, a.pos, a.neg, a.test, a.seed)?;
    let train_path = a.out_dir.join("train.csv");
    let test_path = a.out_dir.join("test.csv");
    let latent_path = a.out_dir.join("latent.json");
    save_dataset(&exp.train_dataset()?, &train_path)?;
    save_dataset(&exp.test_dataset()?, &test_path)?;
    let records: Vec<LatentRecord> = latent_records(&exp.train, "train")
        .chain(latent_records(&exp.test, "test"))
        .collect();
    write_json(&latent_path, &records)?;
    Ok(RunRecord {
        config: serde_json::json!({
            "simulation": config,
            "pos": a.pos,
            "neg": a.neg,
            "test": a.test,
        }),
        seed: a.seed,
        inputs,
        outputs: vec![train_path, test_path, latent_path],
    })
}

fn evaluate_cmd(a: &EvaluateArgs) -> Outcome<RunRecord> {
    let config = PipelineConfig {
        method: a.method,
        estimator: a.divergence.estimator,
        spec: spec_from(&a.divergence),
        threshold: a.threshold,
        svm_feature: a.svm_feature,
        ckl_orientation: a.divergence.ckl_orientation,
        pca_components: a.pca,
        ..PipelineConfig::default()
    };
    let train = load_dataset(&a.train)?;
    let mut inputs = vec![a.train.clone()];
    let report = match (a.folds, &a.test) {
        (Some(_), Some(_)) => return Err(Failure::Usage("use either --test or --folds, not both".into())),
        (None, None) => return Err(Failure::Usage("--test is required unless --folds is given".into())),
        (Some(k), None) => cross_validate(&train, k, &config, a.repeats, a.seed)?,
        (None, Some(test_path)) => {
            let test = load_dataset(test_path)?;
            inputs.push(test_path.clone());
            evaluate(&train, &test, &config, a.seed)?
        }
    };
    prepare_dir(&a.out_dir)?;
    let report_path = a.out_dir.join("report.json");
    let roc_path = a.out_dir.join("roc.csv");
    write_json(&report_path, &report)?;
    let mut roc = String::from("fpr,tpr\n");
    for (f, t) in &report.roc {
        roc.push_str(&format!("{f},{t}\n"));
    }
    write_text(&roc_path, &roc)?;
    if let Some(auc) = report.auc {
        eprintln!("{} AUC {auc:.4}", report.method);
    }
    Ok(RunRecord {
        config: serde_json::json!({
            "pipeline": config,
            "folds": a.folds,
            "repeats": a.repeats,
        }),
        seed: a.seed,
        inputs,
        outputs: vec![report_path, roc_path],
    })
}

const TABLE_METHODS: [Method; 3] = [Method::RdBh, Method::RdKl, Method::Ckl];

fn short_name(m: Method) -> &'static str {
    match m {
        Method::RdBh => "rBH",
        Method::RdKl => "rKL",
        Method::Ckl => "cKL",
        other => other.name(),
    }
}

/// One row per positive count; for each negative count and method the
/// estimate, the published value and their difference.
fn table1_csv(study: &SimStudy) -> anyhow::Result<String> {
    let mut pos_counts: Vec<usize> = study.cells.iter().map(|c| c.pos).collect();
    pos_counts.sort_unstable();
    pos_counts.dedup();
    let mut neg_counts: Vec<usize> = study.cells.iter().map(|c| c.neg).collect();
    neg_counts.sort_unstable();
    neg_counts.dedup();

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["scenario".to_string(), "pos".to_string()];
    for n in &neg_counts {
        for &m in &study.methods {
            let s = short_name(m);
            header.push(format!("{s}_neg{n}"));
            header.push(format!("published_{s}_neg{n}"));
            header.push(format!("diff_{s}_neg{n}"));
        }
    }
    w.write_record(&header)?;
    for &p in &pos_counts {
        let mut row = vec![study.scenario.to_string(), p.to_string()];
        for &n in &neg_counts {
            for &m in &study.methods {
                match study.mean(p, n, m) {
                    Some(ours) => {
                        row.push(format!("{ours:.2}"));
                        match published_auc(study.scenario, p, n, m) {
                            Some(published) => {
                                row.push(format!("{published:.0}"));
                                row.push(format!("{:.2}", ours - published));
                            }
                            None => row.extend([String::new(), String::new()]),
                        }
                    }
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
    Ok(String::from_utf8(bytes)?)
}

fn table1(a: &Table1Args) -> Outcome<RunRecord> {
    if a.scenario == Scenario::Custom {
        return Err(Failure::Usage("table1 needs a named scenario (sim1 .. sim6)".into()));
    }
    if a.reps == 0 || a.test < 2 {
        return Err(Failure::Usage("--reps must be at least 1 and --test at least 2".into()));
    }
    let grid: Vec<(usize, usize)> = if a.cells.is_empty() {
        TABLE1_GRID.to_vec()
    } else {
        a.cells.clone()
    };
    let options = StudyOptions {
        estimator: a.divergence.estimator,
        spec: spec_from(&a.divergence),
        n_test: a.test,
        pipeline: PipelineConfig {
            ckl_orientation: a.divergence.ckl_orientation,
            ..PipelineConfig::default()
        },
    };
    let config = SimConfig::preset(a.scenario);
    let study = run_sim_study(&config, &grid, a.reps, &TABLE_METHODS, &options, a.seed)?;

    prepare_dir(&a.out_dir)?;
    let csv_path = a.out_dir.join(format!("table1_{}.csv", a.scenario));
    let json_path = a.out_dir.join(format!("table1_{}.json", a.scenario));
    write_text(&csv_path, &table1_csv(&study)?)?;
    write_json(&json_path, &study)?;
    for c in &study.cells {
        let cols: Vec<String> = TABLE_METHODS
            .iter()
            .zip(&c.mean_auc)
            .map(|(&m, v)| {
                let published = published_auc(a.scenario, c.pos, c.neg, m).map_or("-".into(), |p| format!("{p:.0}"));
                format!("{} {v:5.1} (published {published})", short_name(m))
            })
            .collect();
        eprintln!("pos={:<2} neg={:<2} {}", c.pos, c.neg, cols.join("  "));
    }
    Ok(RunRecord {
        config: serde_json::json!({
            "scenario": a.scenario,
            "grid": grid,
            "repetitions": a.reps,
            "options": options,
        }),
        seed: a.seed,
        inputs: Vec::new(),
        outputs: vec![csv_path, json_path],
    })
}

fn replay(a: &ReplayArgs) -> Outcome<ExitCode> {
    let recorded = RunManifest::load(&a.manifest)?;
    let mut argv = vec!["midiv".to_string()];
    argv.extend(recorded.command.iter().cloned());
    let mut cli = Cli::try_parse_from(&argv)
        .map_err(|e| Failure::Usage(format!("manifest command does not parse: {e}")))?;
    let mut args = recorded.command.clone();
    if let Some(dir) = &a.out_dir {
        let slot = cli
            .command
            .out_dir_mut()
            .ok_or_else(|| Failure::Usage("a manifest cannot record a replay".into()))?;
        *slot = dir.clone();
        args.push("--out-dir".into());
        args.push(dir.display().to_string());
    }
    for input in &recorded.inputs {
        let now = FileDigest::of(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(Failure::Runtime(anyhow!(
                "{}: input changed since the recorded run",
                input.path.display()
            )));
        }
    }
    let fresh = execute(cli.command, args, recorded.threads)?;
    let mut all_same = true;
    for old in &recorded.outputs {
        let name = old.path.file_name().unwrap_or_default();
        let new = fresh.outputs.iter().find(|o| o.path.file_name() == Some(name));
        let same = new.is_some_and(|n| n.sha256 == old.sha256);
        all_same &= same;
        let path = new.map_or_else(|| old.path.clone(), |n| n.path.clone());
        println!("{} {}", if same { "identical" } else { "differs" }, path.display());
    }
    Ok(if all_same { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
