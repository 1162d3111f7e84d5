mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use maneuverforge_core::agents::{AgentBackend, AgentError, FixtureWriter, ReplayBackend, ScriptedBackend};
use maneuverforge_core::harness::{write_trajectory_csv, write_velocity_csv};
use maneuverforge_core::llm::{LlmBackend, LlmClient};
use maneuverforge_core::orchestrator::{
    run_batch, summarize, write_iteration_csv, write_learning_csv, BackendKind, BatchReport, LoopError, RunResult,
    Session,
};

use config::{RunConfigFile, DEFAULT_TASK};
use output::{write_atomic, write_with};

const EXIT_CONVERGED: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BEST_EFFORT: u8 = 3;
const EXIT_FIXTURE_EXHAUSTED: u8 = 4;

#[derive(Parser)]
#[command(name = "maneuverforge", version, about = "Closed-loop J-turn planning with pluggable plan generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one refinement loop.
    Run(RunArgs),
    /// Run many independent loops and aggregate them.
    Batch(BatchArgs),
    /// Run one loop against a recorded fixture.
    Replay(ReplayArgs),
    /// Print tables from saved batch reports.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instruction given to the agents.
    #[arg(long)]
    task: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// llm, scripted or replay.
    #[arg(long)]
    backend: Option<BackendKind>,
    /// Fixture for the replay backend.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Append live responses to this fixture.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 20)]
    batch_size: usize,
    /// Parallel trials; 0 means one per logical core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    fixture: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// batch_report.json files; two inputs produce a side-by-side table.
    #[arg(long, required = true, num_args = 1..=2)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Fully resolved settings for one command.
struct Resolved {
    file: RunConfigFile,
    task: String,
    out: PathBuf,
}

enum Failure {
    Config(String),
    Fatal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Fatal(e)
    }
}

fn resolve(common: &Common) -> Result<Resolved, Failure> {
    let mut file = config::load(common.config.as_deref()).map_err(|e| Failure::Config(e.0))?;
    if let Some(b) = common.backend {
        file.loop_config.backend = b;
    }
    if let Some(f) = &common.fixture {
        file.fixture = Some(f.clone());
    }
    let task = common.task.clone().or_else(|| file.task.clone()).unwrap_or_else(|| DEFAULT_TASK.to_string());
    if task.trim().is_empty() {
        return Err(Failure::Config("task text is empty".into()));
    }
    let out = common.out.clone().or_else(|| file.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved { file, task, out })
}

fn make_backend(file: &RunConfigFile, seed: u64, record: Option<&Path>) -> Result<Box<dyn AgentBackend>, AgentError> {
    Ok(match file.loop_config.backend {
        BackendKind::Scripted => Box::new(ScriptedBackend::new(seed, file.loop_config.seed_jitter)),
        BackendKind::Replay => {
            let path =
                file.fixture.as_ref().ok_or_else(|| AgentError::Fixture("replay backend needs --fixture".into()))?;
            Box::new(ReplayBackend::from_path(path)?)
        }
        BackendKind::Llm => {
            let backend = LlmBackend::new(LlmClient::new(file.llm.clone()));
            match record {
                Some(p) => Box::new(backend.recording(FixtureWriter::new(p))),
                None => Box::new(backend),
            }
        }
    })
}

fn write_records_csv<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (usize, &'a maneuverforge_core::orchestrator::IterationRecord)>,
) -> Result<()> {
    write_with(path, |buf| write_iteration_csv(rows, buf).map_err(Into::into))
}

fn write_run_outputs(r: &Resolved, result: &RunResult) -> Result<()> {
    write_atomic(&r.out.join("run_result.json"), result.to_json().as_bytes())?;
    if r.file.exports.iteration_log {
        write_records_csv(&r.out.join("iterations.csv"), result.records.iter().map(|rec| (0, rec)))?;
    }
    if r.file.exports.trajectory_csv {
        if let Some(traj) = &result.best_trajectory {
            write_with(&r.out.join("best_trajectory.csv"), |buf| write_trajectory_csv(traj, buf).map_err(Into::into))?;
        }
    }
    Ok(())
}

fn execute_loop(r: &Resolved, record: Option<&Path>) -> Result<u8, Failure> {
    let session = Session::new(r.file.loop_config.clone()).map_err(|e| Failure::Config(e.to_string()))?;
    if record.is_some() && r.file.loop_config.backend != BackendKind::Llm {
        return Err(Failure::Config("--record needs the llm backend".into()));
    }
    let mut backend =
        make_backend(&r.file, r.file.loop_config.seed, record).map_err(|e| Failure::Config(e.to_string()))?;
    match session.run_loop(&r.task, &mut backend) {
        Ok(result) => {
            write_run_outputs(r, &result)?;
            let m = result.best_metrics;
            println!(
                "{} after {} iteration(s): best cost {:.3} at k={}, heading error {:+.2} deg, collision {}",
                if result.converged { "converged" } else { "best effort" },
                result.iterations_used,
                result.best_cost,
                result.best_iteration,
                m.signed_heading_error,
                m.collision
            );
            Ok(if result.converged { EXIT_CONVERGED } else { EXIT_BEST_EFFORT })
        }
        Err(LoopError::Config(m)) => Err(Failure::Config(m)),
        Err(e) => {
            if r.file.exports.iteration_log {
                write_records_csv(&r.out.join("iterations.csv"), e.records().iter().map(|rec| (0, rec)))?;
            }
            eprintln!("error: {e}");
            Ok(match &e {
                LoopError::Backend { error: AgentError::FixtureExhausted(_), .. } => EXIT_FIXTURE_EXHAUSTED,
                _ => EXIT_FATAL,
            })
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<u8, Failure> {
    let r = resolve(&args.common)?;
    let record = args.record.clone().or_else(|| r.file.record_fixture.clone());
    execute_loop(&r, record.as_deref())
}

fn cmd_replay(args: &ReplayArgs) -> Result<u8, Failure> {
    let common = Common {
        config: args.config.clone(),
        task: args.task.clone(),
        out: args.out.clone(),
        backend: Some(BackendKind::Replay),
        fixture: Some(args.fixture.clone()),
    };
    let r = resolve(&common)?;
    if !args.fixture.is_file() {
        return Err(Failure::Config(format!("fixture {} does not exist", args.fixture.display())));
    }
    execute_loop(&r, None)
}

fn write_batch_outputs(r: &Resolved, report: &BatchReport) -> Result<()> {
    write_atomic(&r.out.join("batch_report.json"), report.to_json().as_bytes())?;
    write_atomic(&r.out.join("table1.txt"), report.implementation.render().as_bytes())?;
    if let Some(t) = &report.comparison {
        write_atomic(&r.out.join("table2.txt"), t.render().as_bytes())?;
    }
    write_with(&r.out.join("learning_progress.csv"), |buf| {
        write_learning_csv(&report.batches, buf).map_err(Into::into)
    })?;
    if r.file.exports.velocity_csv && !report.velocity.is_empty() {
        write_with(&r.out.join("velocity_ci.csv"), |buf| {
            write_velocity_csv(&report.velocity, buf).map_err(Into::into)
        })?;
    }
    if r.file.exports.iteration_log {
        let rows = report.trials.iter().flat_map(|t| t.records.iter().map(move |rec| (t.trial, rec)));
        write_records_csv(&r.out.join("iterations.csv"), rows)?;
    }
    Ok(())
}

fn cmd_batch(args: &BatchArgs) -> Result<u8, Failure> {
    let r = resolve(&args.common)?;
    if args.trials == 0 || args.batch_size == 0 {
        return Err(Failure::Config("--trials and --batch-size must be at least 1".into()));
    }
    if r.file.record_fixture.is_some() {
        return Err(Failure::Config("record_fixture is not supported for batches".into()));
    }
    let file = &r.file;
    let report = run_batch(&file.loop_config, &r.task, args.trials, args.batch_size, args.jobs, |_, seed| {
        make_backend(file, seed, None)
    })
    .map_err(|e| match e {
        LoopError::Config(m) => Failure::Config(m),
        other => Failure::Fatal(anyhow!(other)),
    })?;
    write_batch_outputs(&r, &report)?;
    print!("{}", report.implementation.render());
    if let Some(t) = &report.comparison {
        print!("\n{}", t.render());
    }
    info!("outputs written to {}", r.out.display());
    Ok(EXIT_CONVERGED)
}

fn cmd_report(args: &ReportArgs) -> Result<u8, Failure> {
    let mut sets = Vec::new();
    for path in &args.input {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let report: BatchReport = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
        println!("{} ({})", path.display(), report.vehicle);
        print!("{}", report.implementation.render());
        let label = if sets.iter().any(|(l, _): &(String, _)| *l == report.vehicle) {
            format!("{} ({})", report.vehicle, sets.len() + 1)
        } else {
            report.vehicle.clone()
        };
        sets.push((label, report.metrics()));
    }
    let table = summarize(&sets).map_err(|e| Failure::Fatal(anyhow!(e)))?;
    print!("\n{}", table.render());
    if let Some(out) = &args.out {
        write_atomic(&out.join("comparison.txt"), table.render().as_bytes())?;
        let json = serde_json::to_string_pretty(&table).context("serializing comparison")?;
        write_atomic(&out.join("comparison.json"), json.as_bytes())?;
    }
    Ok(EXIT_CONVERGED)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Report(a) => cmd_report(a),
    };
    ExitCode::from(match outcome {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    })
}
