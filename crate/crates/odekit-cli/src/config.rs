//! JSON run configurations. Shape errors come from serde with line/column
//! positions; everything else goes through explicit validation that names
//! the offending field. No output is produced until a config has fully
//! validated.

use std::path::Path;
use std::str::FromStr;

use odekit::ode::{RkMethod, TimeGrid};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config field {field}: {reason}")]
    Field { field: String, reason: String },
    #[error("config is for experiment '{found}' but the '{expected}' command was run")]
    WrongExperiment { expected: String, found: String },
}

fn bad(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t0: f64,
    pub t1: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn to_grid(&self, prefix: &str) -> Result<TimeGrid, ConfigError> {
        if self.n_steps == 0 {
            return Err(bad(format!("{prefix}.n_steps"), "must be at least 1"));
        }
        if !self.t0.is_finite() || !self.t1.is_finite() || self.t1 <= self.t0 {
            return Err(bad(format!("{prefix}.t1"), "needs finite t0 < t1"));
        }
        Ok(TimeGrid::new(self.t0, self.t1, self.n_steps).expect("validated above"))
    }
}

pub fn parse_method(s: &str) -> Result<RkMethod, ConfigError> {
    RkMethod::from_str(s)
        .map_err(|_| bad("method", format!("unknown method '{s}' (expected euler, rk4, or rk38)")))
}

fn finite_slice(field: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(bad(field, "all entries must be finite"))
    }
}

/// Which models a solve batch runs: a seeded Lotka-Volterra batch or a set
/// of mammillary compartment systems with seeded rates.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    #[serde(default = "default_dose")]
    pub dose: f64,
    /// Zero out elimination so total mass is conserved.
    #[serde(default)]
    pub closed: bool,
}

fn default_dose() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub grid: GridSpec,
    pub model: ModelSpec,
}

impl SolveConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        parse_method(&self.method)?;
        self.grid.to_grid("grid")?;
        match self.model.kind.as_str() {
            "lotka-volterra" => {
                let count = self
                    .model
                    .count
                    .ok_or_else(|| bad("model.count", "required for kind lotka-volterra"))?;
                if count == 0 {
                    return Err(bad("model.count", "must be at least 1"));
                }
                if self.model.sizes.is_some() {
                    return Err(bad("model.sizes", "not used by kind lotka-volterra"));
                }
            }
            "compartments" => {
                let sizes = self
                    .model
                    .sizes
                    .as_ref()
                    .ok_or_else(|| bad("model.sizes", "required for kind compartments"))?;
                if sizes.is_empty() {
                    return Err(bad("model.sizes", "must list at least one size"));
                }
                if sizes.iter().any(|&n| n < 2) {
                    return Err(bad("model.sizes", "every size needs at least 2 compartments"));
                }
                if self.model.count.is_some() {
                    return Err(bad("model.count", "not used by kind compartments"));
                }
                if !(self.model.dose.is_finite() && self.model.dose > 0.0) {
                    return Err(bad("model.dose", "must be finite and positive"));
                }
            }
            other => {
                return Err(bad(
                    "model.kind",
                    format!("unknown kind '{other}' (expected lotka-volterra or compartments)"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub grid: GridSpec,
    pub ground_truth: Vec<f64>,
    pub y0: Vec<f64>,
    /// Number of uniformly spaced observation times after t0; must divide
    /// the grid so samples land exactly on grid points.
    pub samples: usize,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    /// Seeded uniform perturbation half-width applied to the ground truth
    /// to form θ0. Exactly one of `theta0` and `perturbation` is given.
    #[serde(default)]
    pub perturbation: Option<f64>,
    pub optimizer: String,
    pub learning_rate: f64,
    pub tol: f64,
    pub max_iters: usize,
    #[serde(default)]
    pub log_space: bool,
}

impl EstimateConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        parse_method(&self.method)?;
        self.grid.to_grid("grid")?;
        if self.ground_truth.len() != 4 {
            return Err(bad("ground_truth", "expects the four Lotka-Volterra rates"));
        }
        finite_slice("ground_truth", &self.ground_truth)?;
        if self.y0.len() != 2 {
            return Err(bad("y0", "expects the two initial populations"));
        }
        finite_slice("y0", &self.y0)?;
        if self.samples == 0 {
            return Err(bad("samples", "must be at least 1"));
        }
        if self.grid.n_steps % self.samples != 0 {
            return Err(bad("samples", "must divide grid.n_steps so samples lie on the grid"));
        }
        match (&self.theta0, &self.perturbation) {
            (Some(t0), None) => {
                if t0.len() != 4 {
                    return Err(bad("theta0", "expects four entries"));
                }
                finite_slice("theta0", t0)?;
            }
            (None, Some(p)) => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(bad("perturbation", "must be finite and positive"));
                }
            }
            _ => {
                return Err(bad(
                    "theta0",
                    "provide exactly one of theta0 and perturbation",
                ));
            }
        }
        match self.optimizer.as_str() {
            "gd" | "adam" => {}
            other => {
                return Err(bad(
                    "optimizer",
                    format!("unknown optimizer '{other}' (expected gd or adam)"),
                ));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(bad("learning_rate", "must be finite and positive"));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(bad("tol", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSpec {
    pub k: f64,
    pub b: f64,
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainNodeConfig {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub oscillator: OscillatorSpec,
    pub grid: GridSpec,
    /// Horizon the trained field is solved over after training; must start
    /// where the training window ends.
    pub extrapolation: GridSpec,
}

impl TrainNodeConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        parse_method(&self.method)?;
        self.grid.to_grid("grid")?;
        self.extrapolation.to_grid("extrapolation")?;
        if self.hidden == 0 {
            return Err(bad("hidden", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(bad("epochs", "must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(bad("learning_rate", "must be finite and positive"));
        }
        if self.oscillator.y0.len() != 2 {
            return Err(bad("oscillator.y0", "expects position and velocity"));
        }
        finite_slice("oscillator.y0", &self.oscillator.y0)?;
        if !(self.oscillator.k.is_finite() && self.oscillator.b.is_finite()) {
            return Err(bad("oscillator.k", "rates must be finite"));
        }
        if self.extrapolation.t0 != self.grid.t1 {
            return Err(bad(
                "extrapolation.t0",
                "must equal grid.t1 for a continuous handoff",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrayScottSpec {
    pub d_u: f64,
    pub d_v: f64,
    pub feed: f64,
    pub kill: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactDiffuseConfig {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub nx: usize,
    pub ny: usize,
    pub grid: GridSpec,
    pub stride: usize,
    pub params: GrayScottSpec,
    #[serde(default = "default_background")]
    pub background: String,
}

fn default_background() -> String {
    "zero".to_owned()
}

impl ReactDiffuseConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        parse_method(&self.method)?;
        self.grid.to_grid("grid")?;
        if self.nx < 71 {
            return Err(bad("nx", "must be at least 71 to hold the seeded square"));
        }
        if self.ny < 71 {
            return Err(bad("ny", "must be at least 71 to hold the seeded square"));
        }
        if self.stride == 0 {
            return Err(bad("stride", "must be at least 1"));
        }
        let p = [
            self.params.d_u,
            self.params.d_v,
            self.params.feed,
            self.params.kill,
        ];
        if !p.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(bad("params", "rates must be finite and non-negative"));
        }
        match self.background.as_str() {
            "zero" | "saturated" => Ok(()),
            other => Err(bad(
                "background",
                format!("unknown background '{other}' (expected zero or saturated)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub experiment: String,
    pub seed: u64,
    pub method: String,
    pub grid: GridSpec,
    pub sizes: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_dose")]
    pub dose: f64,
}

fn default_reps() -> usize {
    5
}

impl BenchConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        parse_method(&self.method)?;
        self.grid.to_grid("grid")?;
        if self.sizes.is_empty() {
            return Err(bad("sizes", "must list at least one compartment count"));
        }
        if self.sizes.iter().any(|&n| n < 2) {
            return Err(bad("sizes", "every size needs at least 2 compartments"));
        }
        if self.reps == 0 {
            return Err(bad("reps", "must be at least 1"));
        }
        if !(self.dose.is_finite() && self.dose > 0.0) {
            return Err(bad("dose", "must be finite and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum RunConfig {
    Solve(SolveConfig),
    Estimate(EstimateConfig),
    TrainNode(TrainNodeConfig),
    ReactDiffuse(ReactDiffuseConfig),
    Bench(BenchConfig),
}

impl RunConfig {
    pub fn experiment(&self) -> &str {
        match self {
            RunConfig::Solve(_) => "solve",
            RunConfig::Estimate(_) => "estimate",
            RunConfig::TrainNode(_) => "train-node",
            RunConfig::ReactDiffuse(_) => "react-diffuse",
            RunConfig::Bench(_) => "bench",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunConfig::Solve(c) => c.seed,
            RunConfig::Estimate(c) => c.seed,
            RunConfig::TrainNode(c) => c.seed,
            RunConfig::ReactDiffuse(c) => c.seed,
            RunConfig::Bench(c) => c.seed,
        }
    }
}

/// Parses and validates a config file, returning it together with the raw
/// bytes that get hashed into the report.
pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>), ConfigError> {
    let raw = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;

    #[derive(Deserialize)]
    struct Probe {
        experiment: String,
    }
    let probe: Probe = serde_json::from_slice(&raw)?;
    let cfg = match probe.experiment.as_str() {
        "solve" => RunConfig::Solve(serde_json::from_slice(&raw)?),
        "estimate" => RunConfig::Estimate(serde_json::from_slice(&raw)?),
        "train-node" => RunConfig::TrainNode(serde_json::from_slice(&raw)?),
        "react-diffuse" => RunConfig::ReactDiffuse(serde_json::from_slice(&raw)?),
        "bench" => RunConfig::Bench(serde_json::from_slice(&raw)?),
        other => {
            return Err(bad(
                "experiment",
                format!("unknown experiment '{other}' (expected solve, estimate, train-node, react-diffuse, or bench)"),
            ));
        }
    };
    match &cfg {
        RunConfig::Solve(c) => c.validate()?,
        RunConfig::Estimate(c) => c.validate()?,
        RunConfig::TrainNode(c) => c.validate()?,
        RunConfig::ReactDiffuse(c) => c.validate()?,
        RunConfig::Bench(c) => c.validate()?,
    }
    Ok((cfg, raw))
}
