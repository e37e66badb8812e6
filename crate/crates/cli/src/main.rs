use std::path::PathBuf;
use std::process::ExitCode;

use bdie_cli::{exit, run, Command, RunConfig};
use clap::Parser;

/// Boundary-domain integral equation solver for the exterior mixed problem.
///
/// Exit status: 0 success, 1 gate failure, 2 configuration error,
/// 3 resource cap. `BDIE_OUT` overrides the output directory.
#[derive(Parser)]
#[command(name = "bdie", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; defaults are used for missing fields.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Worker threads, overriding the configuration.
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => match RunConfig::from_file(p) {
            Ok(c) => c,
            Err(e) => return fail(e.exit_code(), &e.to_string()),
        },
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    match run(cli.command, &config) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if !out.passed {
                eprintln!("gate failure");
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => fail(e.exit_code(), &e.to_string()),
    }
}

fn fail(code: i32, msg: &str) -> ExitCode {
    eprintln!("bdie: {msg}");
    ExitCode::from(if code == 0 { exit::GATE_FAILURE } else { code } as u8)
}
