use std::path::PathBuf;
use std::process::ExitCode;

use artefact_cli::config::{RunConfig, Stage};
use clap::Parser;

/// Coin die clustering and sherd reconstruction, one stage at a time.
#[derive(Parser)]
#[command(
    name = "artefact-lab",
    version,
    about = "Staged pipelines for coin die studies and ceramic sherd reassembly",
    after_long_help = config_reference()
)]
struct Cli {
    /// Pipeline stage to run
    #[arg(value_enum)]
    stage: Stage,

    /// TOML configuration file; defaults apply for every omitted key
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory holding upstream artifacts (defaults to --out)
    #[arg(long = "in", value_name = "DIR")]
    in_dir: Option<PathBuf>,

    /// Directory receiving this stage's artifacts
    #[arg(long = "out", value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Run seed; every stage derives its randomness from it
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn config_reference() -> String {
    format!(
        "Configuration reference (TOML, shown with every default):\n\n{}",
        RunConfig::reference_toml()
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> artefact_cli::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = cli.in_dir {
        cfg.in_dir = Some(dir);
    }
    if let Some(dir) = cli.out_dir {
        cfg.out_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    artefact_cli::run_stage(&cfg, cli.stage)
}
