use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relaxctl::cli::{run, CliOptions, Command};

#[derive(Parser)]
#[command(
    name = "relaxctl",
    version,
    about = "Certificates, chattering sequences, and variational checks for relaxed optimal control"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve and verify multiplier certificates for a relaxed candidate
    Certify(CommonArgs),
    /// Build approximating control sequences and check convergence bounds
    Chatter(ChatterArgs),
    /// Check the generalized Euler/Weierstrass/Legendre conditions
    Calcvar(CommonArgs),
    /// Validate supplied derivatives against central finite differences
    Gradcheck(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Directory for report files; the JSON also goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured grid step count
    #[arg(long)]
    grid: Option<usize>,
    /// Override the configured RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ChatterArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Build the sequence even without a verified normal certificate
    #[arg(long)]
    override_normality: bool,
}

fn options(common: CommonArgs, override_normality: bool) -> CliOptions {
    CliOptions {
        config_path: common.config,
        out_dir: common.out,
        grid_override: common.grid,
        seed_override: common.seed,
        override_normality,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Cmd::Certify(c) => (Command::Certify, options(c, false)),
        Cmd::Chatter(c) => (Command::Chatter, options(c.common, c.override_normality)),
        Cmd::Calcvar(c) => (Command::Calcvar, options(c, false)),
        Cmd::Gradcheck(c) => (Command::Gradcheck, options(c, false)),
    };
    match run(command, &opts) {
        Ok((code, json)) => {
            println!("{json}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
