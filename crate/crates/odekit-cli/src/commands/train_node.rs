//! Neural ODE training against a damped-oscillator trajectory, then a
//! forward solve past the training window from the fitted endpoint.

use std::path::Path;

use odekit::models::OscillatorParams;
use odekit::neural_ode::{extrapolate, train_neural_ode, NodeTrainConfig};
use odekit::ode::{mean_abs_deviation, ButcherTableau};
use odekit::sensitivity::integrate_model;
use serde_json::json;

use super::{write_file, CliError, CommandOutput};
use crate::config::TrainNodeConfig;
use crate::csvio::{series_csv, trajectory_csv};

pub fn run(cfg: &TrainNodeConfig, out: &Path, seed: u64) -> Result<CommandOutput, CliError> {
    let method = crate::config::parse_method(&cfg.method)?;
    let grid = cfg.grid.to_grid("grid")?;
    let extrapolation_grid = cfg.extrapolation.to_grid("extrapolation")?;
    let tableau = ButcherTableau::new(method);

    let failed = |error: String| {
        let mut output = CommandOutput::new(json!({ "status": "failed", "error": error }));
        output.failures = 1;
        Ok(output)
    };

    let osc_params = OscillatorParams {
        k: cfg.oscillator.k,
        b: cfg.oscillator.b,
    }
    .to_vec();
    let data = match integrate_model(
        &tableau,
        &odekit::models::DampedOscillator,
        &cfg.oscillator.y0,
        &osc_params,
        grid,
    ) {
        Ok(traj) => traj,
        Err(e) => return failed(format!("training data solve: {e}")),
    };

    let node_cfg = NodeTrainConfig {
        hidden: cfg.hidden,
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        seed,
        method,
    };
    let (params, history) = match train_neural_ode(&data, &node_cfg) {
        Ok(pair) => pair,
        Err(e) => return failed(format!("training: {e}")),
    };

    let fit = match extrapolate(&tableau, &params, &data.states[0], grid) {
        Ok(traj) => traj,
        Err(e) => return failed(format!("fitted solve: {e}")),
    };
    let l1_train = mean_abs_deviation(&fit, &data);

    let continued = match extrapolate(&tableau, &params, fit.final_state(), extrapolation_grid) {
        Ok(traj) => traj,
        Err(e) => return failed(format!("extrapolation solve: {e}")),
    };
    let extrapolation_max_abs = continued
        .states
        .iter()
        .flatten()
        .map(|y| y.abs())
        .fold(0.0, f64::max);

    write_file(
        &out.join("params.json"),
        serde_json::to_string_pretty(&json!({
            "hidden": params.hidden(),
            "theta": params.as_slice(),
        }))
        .expect("parameter json serializes") + "\n",
    )?;
    write_file(&out.join("loss_history.csv"), series_csv("epoch,loss", &history))?;
    write_file(&out.join("fit.csv"), trajectory_csv(&fit))?;
    write_file(&out.join("extrapolation.csv"), trajectory_csv(&continued))?;

    Ok(CommandOutput::new(json!({
        "status": "ok",
        "hidden": cfg.hidden,
        "epochs": cfg.epochs,
        "param_dim": params.as_slice().len(),
        "initial_loss": history.first().copied(),
        "final_loss": history.last().copied(),
        "l1_train": l1_train,
        "extrapolation_max_abs": extrapolation_max_abs,
    })))
}
