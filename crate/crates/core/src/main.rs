use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use villani_net::cli;
use villani_net::config::Command;

#[derive(Parser)]
#[command(name = "villani-net", version, about = "Regularized depth-2 nets: SGD, SDE and Gibbs-measure diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Width × λ sweep with constant-step SGD
    Train(Args),
    /// Threshold, bounds and V_s divergence report
    Verify(Args),
    /// Euler–Maruyama ensemble of the SGD–SDE
    Sde(Args),
    /// Partition function, constants and spectral gap on a grid
    Gibbs(Args),
    /// Synthetic margin dataset as CSV
    GenData(Args),
    /// Binary MNIST digit pairs
    Mnist(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Verify(a) => (Command::Verify, a),
        Cmd::Sde(a) => (Command::Sde, a),
        Cmd::Gibbs(a) => (Command::Gibbs, a),
        Cmd::GenData(a) => (Command::GenData, a),
        Cmd::Mnist(a) => (Command::Mnist, a),
    };
    match cli::run(cmd, &args.config, args.seed, args.output_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
