use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trajlens::pipeline;
use trajlens::{CliError, Loaded, Overrides};
use trajlens_core::tasks::TaskKind;
use trajlens_gateway::Backend;

#[derive(Parser)]
#[command(
    name = "trajlens",
    version,
    about = "Map-anchored multimodal trajectory mining pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split every trajectory into semantically coherent segments.
    Segment(Common),
    /// Render and interleave image-text pairs for every segmented trajectory.
    Assemble(Common),
    /// Refine the task prompt against a few labelled seed trajectories.
    Optimize(OptimizeArgs),
    /// Query the model for every assembled trajectory and parse the answers.
    Run(Common),
    /// Build an anomaly-detection benchmark by injecting detours and switches.
    SynthAnomalies(Common),
    /// Score the results store and write the metrics report.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Remote,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(short, long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_task)]
    task: Option<TaskKind>,
    /// Trajectory file (CSV or GeoJSON).
    #[arg(long)]
    trajectories: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Fixture file for the mock backend.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Prompt file replacing the shipped prompt.
    #[arg(long)]
    prompt: Option<PathBuf>,
    /// Side length of rendered images in pixels.
    #[arg(long)]
    image_px: Option<u32>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    max_rounds: Option<u32>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse()
}

fn load(c: &Common, max_rounds: Option<u32>) -> Result<Loaded, CliError> {
    let mut l = Loaded::load(&c.config)?;
    l.apply(&Overrides {
        output: c.out.clone(),
        jobs: c.jobs,
        seed: c.seed,
        task: c.task,
        trajectories: c.trajectories.clone(),
        backend: c.backend.map(|b| match b {
            BackendArg::Mock => Backend::Mock,
            BackendArg::Remote => Backend::Remote,
        }),
        fixtures: c.fixtures.clone(),
        model: c.model.clone(),
        prompt: c.prompt.clone(),
        image_px: c.image_px,
        max_rounds,
    });
    l.validate()?;
    if let Some(jobs) = l.config.jobs {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    Ok(l)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Segment(c) => {
            let s = pipeline::cmd_segment(&load(&c, None)?)?;
            println!("segmented {} trajectories into {}", s.items, s.dir.display());
        }
        Command::Assemble(c) => {
            let s = pipeline::cmd_assemble(&load(&c, None)?)?;
            println!(
                "assembled {} sequences into {} ({} render warnings)",
                s.items,
                s.dir.display(),
                s.warnings
            );
        }
        Command::Optimize(a) => {
            let (best, trace) = pipeline::cmd_optimize(&load(&a.common, a.max_rounds)?)?;
            println!(
                "optimized {} prompt: {} round(s), best version {} (score {:.4}), stop reason {:?}",
                best.kind,
                trace.rounds.len(),
                trace.best_version,
                trace.best_score,
                trace.stop_reason
            );
        }
        Command::Run(c) => {
            let s = pipeline::cmd_run(&load(&c, None)?)?;
            println!("{} results ({} unparsed) in {}", s.items, s.warnings, s.dir.display());
        }
        Command::SynthAnomalies(c) => {
            let s = pipeline::cmd_synth_anomalies(&load(&c, None)?)?;
            println!("injected {} anomalies into {}", s.items, s.dir.display());
        }
        Command::Report(c) => {
            let r = pipeline::cmd_report(&load(&c, None)?)?;
            print!("{}", r.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trajlens: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
