use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tmreadout::{run, Command, EmitFormat, LoadedConfig, RunContext};

/// Design and simulation toolkit for transmon-molecule dispersive readout.
#[derive(Debug, Parser)]
#[command(name = "tmreadout", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Format of data tables.
    #[arg(long, global = true, value_enum)]
    format: Option<EmitFormat>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(path) = cli.config.as_deref() else {
        eprintln!("error: --config PATH is required");
        return ExitCode::from(2);
    };
    let ctx = RunContext { seed: cli.seed, workers: cli.workers, format: cli.format, out: cli.out.clone() };
    let outcome = LoadedConfig::from_path(path).and_then(|cfg| run(cli.command, &cfg, &ctx));
    match outcome {
        Ok(o) => {
            for line in &o.lines {
                println!("{line}");
            }
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
