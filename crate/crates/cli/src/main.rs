use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ddlab_cli::{run_file, Overrides};

/// Runs a drawdown-modulation experiment described by a JSON config.
#[derive(Parser)]
#[command(name = "ddlab", version)]
struct Cli {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides the config's `out`
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; overrides the config's `threads`
    #[arg(long)]
    threads: Option<usize>,

    /// Master seed; overrides the config's `seed` and the Monte-Carlo backend seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
    };
    match run_file(&cli.config, &ov) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
