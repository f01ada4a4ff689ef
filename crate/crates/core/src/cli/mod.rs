//! Command-line front end: `pseudoplap <subcommand> --config <path> [--seed <u64>] [--out <dir>]`.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::Error;
use config::{Command, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Worker cap; 0 or unset means one worker per core.
pub const THREADS_VAR: &str = "PSEUDOPLAP_THREADS";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subcommand {
    Solve,
    VerifyLemmas,
    MeasureRegularity,
    ConvergenceStudy,
}

impl From<Subcommand> for Command {
    fn from(s: Subcommand) -> Self {
        match s {
            Subcommand::Solve => Command::Solve,
            Subcommand::VerifyLemmas => Command::VerifyLemmas,
            Subcommand::MeasureRegularity => Command::MeasureRegularity,
            Subcommand::ConvergenceStudy => Command::ConvergenceStudy,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pseudoplap", version, about = "Pseudo-p-Laplacian solver and verification harness")]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the `[run]` section.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out` from the `[run]` section.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn thread_count(value: Option<&str>) -> Result<usize, Error> {
    match value {
        None => Ok(0),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_VAR} must be a non-negative integer, got `{v}`"))),
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let mut cfg = match RunConfig::load(cli.command.into(), &cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    let threads = match thread_count(std::env::var(THREADS_VAR).ok().as_deref()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_RUNTIME;
        }
    };
    match pool.install(|| commands::run(&cfg)) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if outcome.passed() {
                EXIT_OK
            } else {
                let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                eprintln!("failed checks: {}", failed.join(", "));
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threads_variable() {
        assert_eq!(thread_count(None).unwrap(), 0);
        assert_eq!(thread_count(Some(" 3")).unwrap(), 3);
        assert!(thread_count(Some("-1")).is_err());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_cli(["pseudoplap", "solve"]), EXIT_CONFIG);
        assert_eq!(run_cli(["pseudoplap", "frobnicate", "--config", "x"]), EXIT_CONFIG);
        assert_eq!(run_cli(["pseudoplap", "solve", "--config", "/nonexistent/cfg.ini"]), EXIT_CONFIG);
    }
}
