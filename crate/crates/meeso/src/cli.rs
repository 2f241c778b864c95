//! Command-line interface: `search` runs the engine and writes run
//! artifacts, `pareto` recomputes a front from a history file, and `eval`
//! scores one candidate end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::engine::{
    self, EvaluatorKind, HistoryDB, RunConfig, RunOutput, RunSink, SelectionPolicy,
};
use crate::error::{Error, Result};
use crate::evaluator::{self, Dataset, EvalOptions, DEFAULT_MC_PASSES, DEFAULT_PROBES};
use crate::logging;
use crate::pareto::{self, hypervolume_2d, write_front_csv};
use crate::types::{validate_candidate, BlockFamily, Candidate, Heuristic, ObjectiveVector};

#[derive(Debug, Parser)]
#[command(
    name = "meeso",
    version,
    about = "Multi-objective pipeline search with a learn-to-rank surrogate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a search and write history.jsonl, checkpoint.jsonl, pareto.csv,
    /// and summary.json into the output directory.
    Search(SearchArgs),
    /// Recompute the Pareto front of a history file and write it as CSV.
    Pareto(ParetoArgs),
    /// Evaluate one candidate end to end and print its record as JSON.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvaluatorArg {
    Trainer,
    Oracle,
}

impl From<EvaluatorArg> for EvaluatorKind {
    fn from(value: EvaluatorArg) -> Self {
        match value {
            EvaluatorArg::Trainer => EvaluatorKind::Trainer,
            EvaluatorArg::Oracle => EvaluatorKind::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SelectionArg {
    Surrogate,
    Random,
}

impl From<SelectionArg> for SelectionPolicy {
    fn from(value: SelectionArg) -> Self {
        match value {
            SelectionArg::Surrogate => SelectionPolicy::Surrogate,
            SelectionArg::Random => SelectionPolicy::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// True-objective backend.
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorArg>,
    /// Comma-separated heuristic presets: plain, residual, bottleneck.
    #[arg(long, value_delimiter = ',')]
    heuristics: Vec<String>,
    /// Initial space size per heuristic.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    init: Option<u64>,
    /// Candidates truly evaluated per inner iteration.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Inner iterations per heuristic.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    iters: Option<u64>,
    /// Rank groups per surrogate model.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    groups: Option<u64>,
    /// Run seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation worker threads (results commit in deterministic order).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Dataset CSV (features..., integer label); required with the trainer.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// The dataset CSV has a header row.
    #[arg(long)]
    has_header: bool,
    /// Stop when a front member reaches this error or less...
    #[arg(long)]
    max_error: Option<f64>,
    /// ...together with this uncertainty or less.
    #[arg(long)]
    max_uncertainty: Option<f64>,
    /// Uncertainty probe vectors per evaluation.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    probes: Option<u64>,
    /// Stochastic forward passes per probe.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    mc_passes: Option<u64>,
    /// Candidate selection policy.
    #[arg(long, value_enum)]
    selection: Option<SelectionArg>,
    /// Drop objective-equal duplicates from the archive.
    #[arg(long)]
    dedupe: bool,
    /// JSON config file merged beneath the flags (flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Resume from a checkpoint file; the run configuration comes from it.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// History file, one evaluation record JSON per line.
    history: PathBuf,
    /// Add wall_seconds as a third minimized objective.
    #[arg(long)]
    with_time: bool,
    /// Output CSV path.
    #[arg(long, default_value = "pareto.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Candidate JSON file.
    candidate: PathBuf,
    /// True-objective backend.
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorArg>,
    /// Dataset CSV; required with the trainer.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// The dataset CSV has a header row.
    #[arg(long)]
    has_header: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uncertainty probe vectors.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    probes: Option<u64>,
    /// Stochastic forward passes per probe.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    mc_passes: Option<u64>,
}

/// Optional config-file counterpart of the search flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    evaluator: Option<EvaluatorKind>,
    heuristics: Option<Vec<Heuristic>>,
    init: Option<u64>,
    k: Option<u64>,
    iters: Option<u64>,
    groups: Option<u64>,
    seed: Option<u64>,
    jobs: Option<u64>,
    out: Option<PathBuf>,
    dataset: Option<PathBuf>,
    has_header: Option<bool>,
    max_error: Option<f64>,
    max_uncertainty: Option<f64>,
    probes: Option<u64>,
    mc_passes: Option<u64>,
    selection: Option<SelectionPolicy>,
    dedupe: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Summary {
    records: usize,
    front_size: usize,
    best_error: Option<f64>,
    hypervolume: f64,
    wall_seconds: f64,
    satisfied: bool,
    exhausted: bool,
}

/// Parse the command line and dispatch; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Pareto(args) => cmd_pareto(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => 0,
        Err(error) => {
            logging::error(&error.to_string());
            match error {
                Error::Usage(_) | Error::InvalidCandidate(_) => 2,
                _ => 1,
            }
        }
    }
}

fn heuristic_presets(names: &[String]) -> Result<Vec<Heuristic>> {
    names
        .iter()
        .map(|name| name.parse::<BlockFamily>().map(Heuristic::preset))
        .collect()
}

fn load_trainer_dataset(path: Option<&Path>, has_header: bool, seed: u64) -> Result<Dataset> {
    let path =
        path.ok_or_else(|| Error::Usage("the trainer evaluator requires --dataset PATH".into()))?;
    match Dataset::from_csv(path, has_header, seed) {
        Err(Error::NotFound(p)) => Err(Error::Usage(format!(
            "dataset file not found: {}",
            p.display()
        ))),
        other => other,
    }
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let started = Instant::now();

    if let Some(checkpoint) = &args.resume {
        let state = engine::resume(checkpoint).map_err(|e| match e {
            Error::NotFound(p) => Error::Usage(format!("checkpoint not found: {}", p.display())),
            other => other,
        })?;
        logging::info(&format!(
            "resuming from {} with {} committed records; configuration comes from the checkpoint",
            checkpoint.display(),
            state.cursor
        ));
        let rc = state.config.clone();
        let data = match rc.evaluator_kind {
            EvaluatorKind::Trainer => Some(load_trainer_dataset(
                args.dataset.as_deref(),
                args.has_header,
                rc.run_seed,
            )?),
            EvaluatorKind::Oracle => None,
        };
        let out_dir = args
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("meeso-out"));
        let output = engine::resume_run(checkpoint, data.as_ref(), Some(&out_dir))?;
        return write_run_artifacts(&out_dir, &output, started.elapsed().as_secs_f64());
    }

    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|_| Error::Usage(format!("config file not found: {}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Usage(format!("config file does not parse: {e}")))?
        }
        None => FileConfig::default(),
    };

    let heuristics = if !args.heuristics.is_empty() {
        heuristic_presets(&args.heuristics)?
    } else if let Some(from_file) = file.heuristics {
        from_file
    } else {
        vec![Heuristic::preset(BlockFamily::Residual)]
    };

    let max_error = args.max_error.or(file.max_error);
    let max_uncertainty = args.max_uncertainty.or(file.max_uncertainty);
    let satisfied_thresholds = match (max_error, max_uncertainty) {
        (Some(e), Some(u)) => Some((e, u)),
        (None, None) => None,
        _ => {
            return Err(Error::Usage(
                "--max-error and --max-uncertainty must be given together".into(),
            ))
        }
    };

    let rc = RunConfig {
        heuristics,
        arches_per_iter: args.k.or(file.k).unwrap_or(4) as usize,
        inner_iterations: args.iters.or(file.iters).unwrap_or(5) as usize,
        initial_space_size: args.init.or(file.init).unwrap_or(20) as usize,
        n_groups: args.groups.or(file.groups).unwrap_or(5) as usize,
        satisfied_thresholds,
        run_seed: args.seed.or(file.seed).unwrap_or(0),
        evaluator_kind: args
            .evaluator
            .map(EvaluatorKind::from)
            .or(file.evaluator)
            .unwrap_or(EvaluatorKind::Oracle),
        jobs: args.jobs.or(file.jobs).unwrap_or(1) as usize,
        selection: args
            .selection
            .map(SelectionPolicy::from)
            .or(file.selection)
            .unwrap_or_default(),
        n_probes: args.probes.or(file.probes).unwrap_or(DEFAULT_PROBES as u64) as usize,
        mc_passes: args
            .mc_passes
            .or(file.mc_passes)
            .unwrap_or(DEFAULT_MC_PASSES as u64) as usize,
        dedupe_archive: args.dedupe || file.dedupe.unwrap_or(false),
    };
    rc.validate().map_err(|e| Error::Usage(e.to_string()))?;

    let data = match rc.evaluator_kind {
        EvaluatorKind::Trainer => Some(load_trainer_dataset(
            args.dataset.as_deref().or(file.dataset.as_deref()),
            args.has_header || file.has_header.unwrap_or(false),
            rc.run_seed,
        )?),
        EvaluatorKind::Oracle => None,
    };

    let out_dir = args
        .out
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("meeso-out"));
    let sink = RunSink::create(&out_dir, &rc)?;
    let output = engine::run(&rc, data.as_ref(), Some(sink))?;
    write_run_artifacts(&out_dir, &output, started.elapsed().as_secs_f64())
}

fn write_run_artifacts(out_dir: &Path, output: &RunOutput, wall_seconds: f64) -> Result<()> {
    let front_path = out_dir.join("pareto.csv");
    write_front_csv(output.archive.members(), fs::File::create(&front_path)?)?;

    // Front points beyond the reference contribute no dominated area.
    let reference = ObjectiveVector::new(1.0, 1.0);
    let within: Vec<ObjectiveVector> = output
        .archive
        .members()
        .iter()
        .map(|m| m.objectives)
        .filter(|o| o.error <= reference.error && o.uncertainty <= reference.uncertainty)
        .collect();
    let hypervolume = hypervolume_2d(&within, &reference)?;

    let best_error = output
        .history
        .records()
        .iter()
        .map(|r| r.objectives.error)
        .min_by(f64::total_cmp);
    let summary = Summary {
        records: output.history.len(),
        front_size: output.archive.len(),
        best_error,
        hypervolume,
        wall_seconds,
        satisfied: output.satisfied,
        exhausted: output.exhausted,
    };
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    println!(
        "{} evaluations, front size {}, best error {}, hypervolume {:.6} -> {}",
        summary.records,
        summary.front_size,
        summary
            .best_error
            .map_or("n/a".into(), |e| format!("{e:.6}")),
        summary.hypervolume,
        out_dir.display()
    );
    Ok(())
}

fn cmd_pareto(args: ParetoArgs) -> Result<()> {
    let history = match HistoryDB::load_jsonl(&args.history) {
        Err(Error::NotFound(p)) => {
            return Err(Error::Usage(format!(
                "history file not found: {}",
                p.display()
            )))
        }
        other => other?,
    };
    let front = if args.with_time {
        pareto::pareto_front_by(history.records(), |r| {
            vec![r.objectives.error, r.objectives.uncertainty, r.wall_seconds]
        })?
    } else {
        pareto::pareto_front(history.records())
    };
    write_front_csv(&front, fs::File::create(&args.out)?)?;
    println!("wrote {} front rows to {}", front.len(), args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let text = fs::read_to_string(&args.candidate).map_err(|_| {
        Error::Usage(format!(
            "candidate file not found: {}",
            args.candidate.display()
        ))
    })?;
    let candidate: Candidate = serde_json::from_str(&text)
        .map_err(|e| Error::Usage(format!("candidate file does not parse: {e}")))?;
    validate_candidate(&candidate)?;

    let evaluator_kind = args
        .evaluator
        .map(EvaluatorKind::from)
        .unwrap_or(EvaluatorKind::Trainer);
    let (record, warnings) = match evaluator_kind {
        EvaluatorKind::Oracle => (
            evaluator::oracle_record(&candidate, args.seed, 0, "adhoc"),
            Vec::new(),
        ),
        EvaluatorKind::Trainer => {
            let data = load_trainer_dataset(args.dataset.as_deref(), args.has_header, args.seed)?;
            let opts = EvalOptions {
                n_probes: args.probes.unwrap_or(DEFAULT_PROBES as u64) as usize,
                mc_passes: args.mc_passes.unwrap_or(DEFAULT_MC_PASSES as u64) as usize,
                ..EvalOptions::new(args.seed)
            };
            let outcome = evaluator::evaluate(&candidate, &data, &opts)?;
            (outcome.record, outcome.warnings)
        }
    };

    let mut value = serde_json::to_value(&record)?;
    if !warnings.is_empty() {
        value["warning"] = serde_json::Value::String(warnings.join("; "));
    }
    println!("{}", serde_json::to_string(&value)?);
    Ok(())
}
