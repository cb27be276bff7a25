use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tailprofile_cli::{run, CliError, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "tailprofile", version, about = "Simulate, fit and analyze profile random vectors")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Draw X, Z*, U, T, S or Z vectors from a model.
    Simulate(Common),
    /// Fit a Husler-Reiss model by diagonal peaks-over-threshold.
    Fit(Common),
    /// Principal components of a profile covariance or of profile samples.
    Pca(Common),
    /// Transform between the laws of max(T) and max(U).
    Link(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Input file, overriding `input` in the config.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn execute(command: Command, args: Common) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(
        command,
        Overrides {
            seed: args.seed,
            out_dir: args.out_dir,
            quantile: args.quantile,
            rank: args.rank,
            grid_step: args.grid_step,
            input: args.input,
        },
    )?;
    for p in run(&cfg)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Fit(a) => (Command::Fit, a),
        Sub::Pca(a) => (Command::Pca, a),
        Sub::Link(a) => (Command::Link, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
