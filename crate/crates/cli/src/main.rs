use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use rotator_cli::{run_file, RunOptions, EXIT_INTERNAL, EXIT_OK};

#[derive(Parser)]
#[command(name = "rotator", version, about = "Run relativistic rotator scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Compute derivatives by finite differences instead of dual numbers.
    #[arg(long, global = true)]
    oracle_fd: bool,
    /// Output directory for reports and data files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { file: PathBuf },
    /// Run every `*.json` scenario in a directory.
    Batch {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn scenario_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    v.sort();
    Ok(v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions {
        seed: cli.seed,
        oracle_fd: cli.oracle_fd,
    };
    let code = match &cli.command {
        Command::Run { file } => {
            let (code, msg) = run_file(file, &cli.out, opts);
            if code == EXIT_OK {
                println!("{msg}");
            } else {
                eprintln!("{}: {msg}", file.display());
            }
            code
        }
        Command::Batch { dir, jobs } => {
            let files = match scenario_files(dir) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("{}: {e}", dir.display());
                    return ExitCode::from(EXIT_INTERNAL as u8);
                }
            };
            let pool = match rayon::ThreadPoolBuilder::new().num_threads((*jobs).max(1)).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("thread pool: {e}");
                    return ExitCode::from(EXIT_INTERNAL as u8);
                }
            };
            let results: Vec<(i32, String)> =
                pool.install(|| files.par_iter().map(|f| run_file(f, &cli.out, opts)).collect());
            // worst outcome wins: internal > refused > validation > ok
            let mut worst = EXIT_OK;
            for (f, (code, msg)) in files.iter().zip(&results) {
                println!("{} [{code}] {msg}", f.display());
                let rank = |c: i32| [0, 2, 3, 4].iter().position(|&x| x == c).unwrap_or(3);
                if rank(*code) > rank(worst) {
                    worst = *code;
                }
            }
            worst
        }
    };
    ExitCode::from(code as u8)
}
