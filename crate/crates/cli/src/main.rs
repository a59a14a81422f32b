//! `softsense <stage> --config <path> [--seed N] [--out DIR]`

mod config;
mod error;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use config::PipelineConfig;
use error::CliError;
use stages::{Context, Stage};

#[derive(Debug, Parser)]
#[command(
    name = "softsense",
    version,
    about = "Soft-sensor development pipeline"
)]
struct Cli {
    /// Pipeline stage to run; `all` chains every stage in order.
    #[arg(value_enum)]
    stage: Stage,
    /// Flat `section.key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `paths.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every loop sequentially regardless of `run.parallel`.
    #[arg(long)]
    sequential: bool,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.sequential {
        cfg.parallel = false;
    }
    cfg.finalize();
    Context::new(cfg).run(cli.stage)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("usage error")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).to_json_line(None));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line(Some(cli.stage)));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
