use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use halfspace_vsm::harness::config::{parse_dims, Algorithm, Command, ExperimentConfig, Settings, StopMode};
use halfspace_vsm::harness::{self, HarnessError};

/// Active learning of homogeneous halfspaces by simplex bisection.
#[derive(Parser)]
#[command(name = "vsm", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Learn one hidden target and print a summary.
    Run(Flags),
    /// Run the learner and both baselines on paired targets.
    Compare(Flags),
    /// Run a dimension by target-error grid and summarize each cell.
    Sweep(Flags),
    /// Check every invariant at every step over many seeds.
    Validate(Flags),
}

#[derive(Clone)]
struct Dims(Vec<usize>);

#[derive(Args)]
struct Flags {
    /// Dimension: a single value, a list `2,5,10`, or a range `2-8`.
    #[arg(long, value_parser = |s: &str| parse_dims(s).map(Dims))]
    dim: Option<Dims>,
    /// Target error(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Label budget.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_enum)]
    stop: Option<StopMode>,
    /// Diameter threshold for `--stop diameter`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    algs: Option<Vec<Algorithm>>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Write learning curves to this CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check invariants after every step.
    #[arg(long)]
    validate: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Record per-point wall time in the CSV.
    #[arg(long)]
    wall_clock: bool,
    /// TOML file with the same keys as the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn settings(self) -> Result<Settings, HarnessError> {
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let flags = Settings {
            dim: self.dim.map(|d| d.0),
            epsilon: self.epsilon,
            budget: self.budget,
            delta: self.delta,
            stop: self.stop,
            gamma: self.gamma,
            radius: self.radius,
            algs: self.algs,
            seeds: self.seeds,
            master_seed: self.master_seed,
            out: self.out,
            validate: self.validate.then_some(true),
            jobs: self.jobs,
            wall_clock: self.wall_clock.then_some(true),
        };
        Ok(file.overlay(flags))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("vsm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    let (command, flags) = match cli.command {
        Sub::Run(f) => (Command::Run, f),
        Sub::Compare(f) => (Command::Compare, f),
        Sub::Sweep(f) => (Command::Sweep, f),
        Sub::Validate(f) => (Command::Validate, f),
    };
    let settings = flags.settings()?;
    if command == Command::Compare {
        let mut defaulted = Vec::new();
        if settings.dim.is_none() {
            defaulted.push("dim 10");
        }
        if settings.budget.is_none() && settings.stop.is_none() && settings.epsilon.is_none() {
            defaulted.push("budget 300");
        }
        if settings.seeds.is_none() {
            defaulted.push("25 seeds");
        }
        if !defaulted.is_empty() {
            eprintln!(
                "note: using harness defaults ({}); pass flags to choose other settings",
                defaulted.join(", ")
            );
        }
    }
    let config = ExperimentConfig::resolve(command, settings)?;

    if command == Command::Validate {
        let summary = harness::validate_suite(&config, None)?;
        print!("{}", summary.format());
        return Ok(if summary.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
    }

    let outcomes = harness::require_success(harness::execute(&config)?)?;
    if let Some(path) = &config.out {
        harness::write_csv(path, &outcomes, config.wall_clock)?;
    }
    match command {
        Command::Sweep => print!("{}", harness::format_sweep(&harness::sweep_cells(&outcomes))),
        _ => print!("{}", harness::summarize_runs(&outcomes)),
    }
    Ok(ExitCode::SUCCESS)
}
