//! Batch front end for the odekit library: each subcommand reads a JSON
//! config, runs one experiment, and writes its outputs plus a `report.json`
//! into the chosen directory.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod pgm;
pub mod report;

use std::path::Path;
use std::time::Instant;

use commands::CommandOutput;
use config::RunConfig;
use report::{config_hash, write_report, RunReport, ToolInfo};

/// Exit code vocabulary: 0 all good, 1 the run executed but some item
/// failed (or output could not be written), 2 the config or invocation was
/// rejected before any work started.
pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILURES: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;

fn merge_timing(wall_seconds: f64, extra: serde_json::Value) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    map.insert("wall_seconds".into(), serde_json::json!(wall_seconds));
    if let serde_json::Value::Object(entries) = extra {
        map.extend(entries);
    }
    serde_json::Value::Object(map)
}

/// Runs one subcommand end to end. Returns the process exit code rather
/// than exiting, so tests can drive it in-process.
pub fn execute(
    command: &str,
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    jobs: usize,
) -> i32 {
    let (cfg, raw) = match config::load_config(config_path) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_BAD_CONFIG;
        }
    };
    if cfg.experiment() != command {
        eprintln!(
            "error: {}",
            config::ConfigError::WrongExperiment {
                expected: command.to_owned(),
                found: cfg.experiment().to_owned(),
            }
        );
        return EXIT_BAD_CONFIG;
    }
    if jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_BAD_CONFIG;
    }
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return EXIT_BAD_CONFIG;
    }

    let seed = seed_override.unwrap_or_else(|| cfg.seed());
    let started = Instant::now();
    let result = match &cfg {
        RunConfig::Solve(c) => commands::solve::run(c, out, seed, jobs),
        RunConfig::Estimate(c) => commands::estimate::run(c, out, seed),
        RunConfig::TrainNode(c) => commands::train_node::run(c, out, seed),
        RunConfig::ReactDiffuse(c) => commands::react_diffuse::run(c, out, seed),
        RunConfig::Bench(c) => commands::bench::run(c, out, seed),
    };
    let CommandOutput {
        metrics,
        timing,
        failures,
    } = match result {
        Ok(output) => output,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUN_FAILURES;
        }
    };

    let report = RunReport {
        tool: ToolInfo::current(),
        experiment: cfg.experiment().to_owned(),
        seed,
        config_hash: config_hash(&raw),
        metrics,
        timing: merge_timing(started.elapsed().as_secs_f64(), timing),
    };
    if let Err(e) = write_report(out, &report) {
        eprintln!("error: cannot write report: {e}");
        return EXIT_RUN_FAILURES;
    }

    if failures > 0 {
        eprintln!("{command}: {failures} item(s) failed; see {}", out.join("report.json").display());
        EXIT_RUN_FAILURES
    } else {
        println!("{command}: ok, report at {}", out.join("report.json").display());
        EXIT_OK
    }
}
