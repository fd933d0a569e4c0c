use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harvest_cli::{run, validate, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "harvest", version, about = "Harvested heterogeneous logistic reaction-diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for sweeps (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Principal eigenpair of the growth operator.
    Eigen,
    /// Unharvested steady state, or the upper harvested state at experiment.delta.
    Steady,
    /// Steady branches through the fold.
    Branches,
    /// Closed-form thresholds delta1, delta2, kappa0, eps0.
    Thresholds,
    /// Trajectory from the unharvested state and its long-time class.
    Evolve,
    /// Periodic orbit under time-periodic forcing.
    Periodic,
    /// Thresholds against landscape fragmentation k.
    SweepFragmentation,
    /// Periodic orbits against forcing frequency.
    SweepOmega,
    /// Check the configuration without running it.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Steady => "steady",
            Command::Branches => "branches",
            Command::Thresholds => "thresholds",
            Command::Evolve => "evolve",
            Command::Periodic => "periodic",
            Command::SweepFragmentation => "sweep-fragmentation",
            Command::SweepOmega => "sweep-omega",
            Command::Validate => "validate",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config {
        path: "--config".into(),
        message: "a configuration file is required".into(),
    })?;
    let cfg = RunConfig::load(path)?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::config("--threads", e))?;
    }
    if let Command::Validate = cli.command {
        let diags = validate(&cfg);
        for d in &diags {
            println!("{d}");
        }
        if diags.is_empty() && !cli.quiet {
            println!("ok");
        }
        return Ok(if diags.is_empty() { 0 } else { 1 });
    }
    let outcome = run(cli.command.name(), &cfg, &cli.out)?;
    if !cli.quiet {
        println!("{}", outcome.summary.line());
    }
    Ok(0)
}
