mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use enclosure::Error;

use crate::config::RunConfig;
use crate::run::Context;

#[derive(Parser)]
#[command(name = "enclosure", version, about = "Probe-based enclosure of inclusions in a fourth-order medium")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML (or .json) run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one forward problem and write u, m and the boundary traces.
    Forward(Common),
    /// Check eikonal identities, WKB residual orders and overflow margins.
    CgoCheck(Common),
    /// Evaluate the indicator over probes × t offsets × h.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Continue from an existing indicator_table.csv.
        #[arg(long)]
        resume: bool,
    },
    /// Fit support estimates and build the enclosure mask.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate the smallness conditions (advisory).
    Admissibility(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, resume) = match &cli.command {
        Command::Forward(c) | Command::CgoCheck(c) | Command::Admissibility(c) => (c, false),
        Command::Sweep { common, resume } | Command::Reconstruct { common, resume } => (common, *resume),
    };
    let result = RunConfig::load(&common.config)
        .and_then(|cfg| Context::new(cfg, common.out.clone(), common.jobs, resume))
        .and_then(|ctx| match &cli.command {
            Command::Forward(_) => run::forward(&ctx),
            Command::CgoCheck(_) => run::cgo_check(&ctx),
            Command::Sweep { .. } => run::sweep(&ctx),
            Command::Reconstruct { .. } => run::reconstruct(&ctx),
            Command::Admissibility(_) => run::admissibility(&ctx),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
