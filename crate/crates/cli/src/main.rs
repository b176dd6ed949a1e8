//! urzeta: compute L-functions of finite-rank sigma-modules over the affine
//! line/space by Euler products and the Monsky trace formula, extract unit
//! roots, and check the engine's identities as congruences.
//!
//! Exit codes: 0 success, 2 verification failure, 3 unsupported surface,
//! 4 input error.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use report::Outcome;
use urzeta_core::error::Error;

#[derive(Parser)]
#[command(name = "urzeta", about = "unit-root L-function engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks in a configuration file and write a JSON report.
    Run {
        /// Configuration file path
        config: PathBuf,
        /// Output report path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for CSV side outputs (slope tables, operator dumps)
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the verification suite.
    Verify {
        /// "all", "quick", or a comma-separated criterion list like "1,2,7"
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn outcome_code(o: Outcome) -> ExitCode {
    match o {
        Outcome::Ok => ExitCode::SUCCESS,
        Outcome::VerifyFailed => ExitCode::from(2),
        Outcome::Unsupported => ExitCode::from(3),
        Outcome::InputError => ExitCode::from(4),
    }
}

fn error_code(e: &Error) -> ExitCode {
    match e {
        Error::ParseError { .. } | Error::ValidationError { .. } | Error::CompositeModulus(_) => {
            ExitCode::from(4)
        }
        Error::UnsupportedDimension(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn run_command(config: PathBuf, out: Option<PathBuf>, csv: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(4);
        }
    };
    let cfg = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return error_code(&e);
        }
    };
    if let Some(dir) = &csv {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(4);
        }
    }
    let engine = match report::Engine::new(cfg) {
        Ok(en) => en,
        Err(e) => {
            eprintln!("error: {e}");
            return error_code(&e);
        }
    };
    let (rep, outcome) = engine.run(csv.as_deref());
    let text = serde_json::to_string_pretty(&rep).expect("report serializes");
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(4);
            }
            eprintln!("report written to {}", path.display());
        }
        None => println!("{text}"),
    }
    outcome_code(outcome)
}

fn verify_command(suite: String) -> ExitCode {
    let ids: Option<Vec<usize>> = match suite.as_str() {
        "all" => None,
        "quick" => Some(vec![1, 3, 4, 5, 6, 8, 9, 12, 13]),
        list => {
            let parsed: std::result::Result<Vec<usize>, _> =
                list.split(',').map(|s| s.trim().parse()).collect();
            match parsed {
                Ok(v) if !v.is_empty() => Some(v),
                _ => {
                    eprintln!("error: --suite expects \"all\", \"quick\" or e.g. \"1,2,7\"");
                    return ExitCode::from(4);
                }
            }
        }
    };
    let results = urzeta_core::suite::run_suite(ids.as_deref());
    let mut all = true;
    for r in &results {
        println!("criterion {:2} [{}] {}", r.id, if r.passed { "PASS" } else { "FAIL" }, r.name);
        if !r.passed {
            all = false;
            for d in &r.details {
                if d.starts_with("FAIL") {
                    println!("    {d}");
                }
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, csv } => run_command(config, out, csv),
        Command::Verify { suite } => verify_command(suite),
    }
}
