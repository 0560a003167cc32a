use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracbsde_cli::config::{self, canonical_bytes, git_blob_sha1};
use fracbsde_cli::report::{self, error_report};
use fracbsde_cli::runner;

#[derive(Parser)]
#[command(name = "fracbsde", version, about = "Fractional BSDE experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a JSON config file
    Run {
        config: PathBuf,
        /// Output directory; overrides `outputs.dir`
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampling seed; overrides the config and scenario defaults
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in scenarios
    Scenarios,
    /// Print contraction constants and admissible delay/horizon bounds
    Admissibility {
        /// Generator Lipschitz constant
        #[arg(long = "L")]
        l: f64,
        /// Occupation ratio bound, must exceed 2
        #[arg(long = "M")]
        m: f64,
        /// Hurst index in (1/2, 1)
        #[arg(long = "H")]
        h: f64,
        /// Machine-readable output
        #[arg(long)]
        json: bool,
    },
}

/// `FRACBSDE_THREADS` caps the worker pool; 0 or unset means automatic.
fn init_thread_pool() -> Result<(), String> {
    let Ok(raw) = std::env::var("FRACBSDE_THREADS") else {
        return Ok(());
    };
    match raw.trim().parse::<usize>() {
        Ok(0) => Ok(()),
        Ok(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}")),
        Err(_) => Err(format!(
            "FRACBSDE_THREADS must be a nonnegative integer, got {raw:?}"
        )),
    }
}

fn cmd_run(config_path: &PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> i32 {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return 2;
        }
    };
    let raw = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let fallback_dir = out
        .clone()
        .or_else(|| raw.outputs.dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match config::resolve(raw.clone(), out, seed) {
        Ok(plan) => runner::execute_and_write(&plan),
        Err(e) => {
            // the config parsed, so an error report can still land on disk
            let code = report::exit_code_for(&e);
            let hash = git_blob_sha1(&canonical_bytes(&raw));
            let rep = error_report(raw, hash, &e);
            if fs::create_dir_all(&fallback_dir).is_ok() {
                let _ = runner::write_report_file(&fallback_dir, &rep);
            }
            eprintln!("error: {e}");
            code
        }
    }
}

fn cmd_admissibility(l: f64, m: f64, h: f64, json: bool) -> i32 {
    match runner::admissibility_rows(l, m, h) {
        Ok(rows) => {
            if json {
                println!("{}", runner::admissibility_json(l, m, h, rows));
            } else {
                println!("{}", runner::admissibility_table(l, m, h, rows));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            report::exit_code_for(&e)
        }
    }
}

fn main() -> ExitCode {
    if let Err(msg) = init_thread_pool() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run { config, out, seed } => cmd_run(&config, out, seed),
        Cmd::Scenarios => {
            println!("{}", runner::scenario_listing());
            0
        }
        Cmd::Admissibility { l, m, h, json } => cmd_admissibility(l, m, h, json),
    };
    ExitCode::from(code as u8)
}
