//! Compartment-count scaling benchmark. Wall times land in the report's
//! timing block (which byte-level determinism comparisons strip), while the
//! metrics block keeps only machine-independent facts.

use std::path::Path;
use std::time::Instant;

use odekit::models::{random_compartments, CompartmentParams, Mammillary};
use odekit::ode::ButcherTableau;
use odekit::sensitivity::integrate_model_keep;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{CliError, CommandOutput};
use crate::config::BenchConfig;

pub fn run(cfg: &BenchConfig, _out: &Path, seed: u64) -> Result<CommandOutput, CliError> {
    let method = crate::config::parse_method(&cfg.method)?;
    let grid = cfg.grid.to_grid("grid")?;
    let tableau = ButcherTableau::new(method);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = Vec::with_capacity(cfg.sizes.len());
    let mut timing_rows = Vec::with_capacity(cfg.sizes.len());
    let mut failures = 0;
    println!("n_compartments  best_of_{}_s", cfg.reps);
    for &n in &cfg.sizes {
        let params = random_compartments(n, &mut rng).to_vec();
        let y0 = CompartmentParams::loaded_central(n, cfg.dose);
        let model = Mammillary::new(n);

        let mut best = f64::INFINITY;
        let mut outcome: Result<Vec<f64>, String> = Err("never ran".into());
        for _ in 0..cfg.reps {
            let started = Instant::now();
            // Keep endpoints only; storing the full trajectory would turn a
            // large-n run into a memory benchmark.
            let result = integrate_model_keep(&tableau, &model, &y0, &params, grid, grid.n_steps());
            let elapsed = started.elapsed().as_secs_f64();
            match result {
                Ok(kept) => {
                    best = best.min(elapsed);
                    outcome = Ok(kept.last().expect("endpoint kept").1.clone());
                }
                Err(e) => outcome = Err(e.to_string()),
            }
        }

        match outcome {
            Ok(final_state) => {
                let finite = final_state.iter().all(|x| x.is_finite());
                if !finite {
                    failures += 1;
                }
                println!("{n:>14}  {best:.6}");
                rows.push(json!({ "n": n, "status": "ok", "finite": finite }));
                timing_rows.push(json!({ "n": n, "min_seconds": best, "reps": cfg.reps }));
            }
            Err(error) => {
                failures += 1;
                println!("{n:>14}  failed: {error}");
                rows.push(json!({ "n": n, "status": "failed", "error": error }));
            }
        }
    }
    println!("wall times depend on the host; compare the scaling, not the numbers");

    Ok(CommandOutput {
        metrics: json!({
            "method": method.name(),
            "reps": cfg.reps,
            "sizes": rows,
            "note": "timings live in the report timing block; they vary by host",
        }),
        timing: json!({ "bench_rows": timing_rows }),
        failures,
    })
}
