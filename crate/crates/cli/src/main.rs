//! Reproducible experiment runner for the open-markets toolkit.
//!
//! Subcommands:
//!   openmkt simulate <config>   write simulated paths as CSV
//!   openmkt run <config>        run the configured experiment
//!   openmkt report <dir>        render plots from a finished run
//!   openmkt selftest            run the built-in invariant fixtures
//!
//! Exit codes: 0 all verdicts pass (or hypothesis-unmet), 1 verdict failure,
//! 2 invalid config or arguments, 3 runtime failure.

mod config;
mod experiments;
mod report;
mod selftest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use config::{ExperimentConfig, ExperimentKind};
use experiments::RunError;

const USAGE: &str = "usage:
  openmkt simulate <config-file>
  openmkt run <config-file>
  openmkt report <run-directory>
  openmkt selftest

The thread count honors OPENMKT_THREADS when set.";

fn init_threads() {
    if let Ok(v) = std::env::var("OPENMKT_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
}

fn load_config(path: &str) -> Result<ExperimentConfig, ExitCode> {
    match ExperimentConfig::load(&PathBuf::from(path)) {
        Ok(c) => Ok(c),
        Err(e) => {
            eprintln!("{e}");
            Err(ExitCode::from(2))
        }
    }
}

fn finish_run(result: Result<(experiments::RunReport, String), RunError>) -> ExitCode {
    match result {
        Ok((report, text)) => {
            print!("{text}");
            if report.all_acceptable() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(RunError::Config(m)) => {
            eprintln!("config: {m}");
            ExitCode::from(2)
        }
        Err(RunError::Runtime(m)) => {
            eprintln!("runtime: {m}");
            ExitCode::from(3)
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let args: Vec<String> = std::env::args().collect();
    match args.get(1).map(|s| s.as_str()) {
        Some("simulate") => {
            let Some(path) = args.get(2) else {
                eprintln!("{USAGE}");
                return ExitCode::from(2);
            };
            let mut cfg = match load_config(path) {
                Ok(c) => c,
                Err(code) => return code,
            };
            cfg.kind = ExperimentKind::Simulate;
            finish_run(experiments::run(&cfg))
        }
        Some("run") => {
            let Some(path) = args.get(2) else {
                eprintln!("{USAGE}");
                return ExitCode::from(2);
            };
            let cfg = match load_config(path) {
                Ok(c) => c,
                Err(code) => return code,
            };
            finish_run(experiments::run(&cfg))
        }
        Some("report") => {
            let Some(dir) = args.get(2) else {
                eprintln!("{USAGE}");
                return ExitCode::from(2);
            };
            match report::render(&PathBuf::from(dir)) {
                Ok(plots) => {
                    for p in plots {
                        println!("wrote {p}");
                    }
                    ExitCode::SUCCESS
                }
                Err(RunError::Config(m)) => {
                    eprintln!("{m}");
                    ExitCode::from(2)
                }
                Err(RunError::Runtime(m)) => {
                    eprintln!("{m}");
                    ExitCode::from(3)
                }
            }
        }
        Some("selftest") => {
            let checks = selftest::run();
            let mut ok = true;
            for c in &checks {
                let label = if c.pass { "PASS" } else { "FAIL" };
                println!("{label} {} ({})", c.name, c.detail);
                ok &= c.pass;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        _ => {
            eprintln!("{USAGE}");
            ExitCode::from(2)
        }
    }
}
