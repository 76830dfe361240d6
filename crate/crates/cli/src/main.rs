//! `ffr`: runs allocation experiments and writes their CSV/JSON outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ffr_core::harness::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use ffr_core::{Error, Kernel};

#[derive(Parser)]
#[command(name = "ffr", version, about = "Two-cell partial frequency reuse allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting power, optimal reuse factor and pivot distance versus rate.
    Asymptotic(Common),
    /// Optimal versus simplified allocation over random user drops.
    Compare(Common),
    /// Simplified allocation power versus the pivot distance.
    Sensitivity(Common),
    /// Normalized squared error of the optimal power versus users per cell.
    Mse(Common),
    /// Allocates one scenario file and writes the result as JSON.
    Allocate {
        /// Scenario JSON; overrides `scenario` of the config.
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => ExperimentConfig::new(kind),
    };
    match cfg.experiment {
        Some(k) if k != kind => {
            return Err(Error::Config {
                field: "experiment".into(),
                message: format!("config is for {k:?}, not {kind:?}"),
            })
        }
        _ => cfg.experiment = Some(kind),
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let (kind, common, scenario) = match cli.command {
        Command::Asymptotic(c) => (ExperimentKind::AsymptoticSweep, c, None),
        Command::Compare(c) => (ExperimentKind::Compare, c, None),
        Command::Sensitivity(c) => (ExperimentKind::Sensitivity, c, None),
        Command::Mse(c) => (ExperimentKind::MseConvergence, c, None),
        Command::Allocate { scenario, common } => (ExperimentKind::Allocate, common, scenario),
    };
    let mut cfg = load(kind, &common)?;
    if scenario.is_some() {
        cfg.scenario = scenario;
    }
    let kernel = Kernel::default();
    let files = run_experiment(&kernel, &cfg)?;
    if kind == ExperimentKind::Allocate {
        print!("{}", files[0].1);
    }
    for path in write_outputs(&cfg.output_dir, &files)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
