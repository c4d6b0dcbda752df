//! Least-squares parameter estimation for ODE models: residuals against
//! observed trajectory samples, sum-of-squares cost, and a gradient-based
//! outer loop driven by forward sensitivities.
//!
//! Observation times must land exactly on solver grid points; there is no
//! interpolation, which keeps the residual free of an extra error term.

use thiserror::Error;

use crate::ode::{ButcherTableau, RkMethod, TimeGrid, Trajectory};
use crate::optimize::{adam_step, AdamState, OptimizeError};
use crate::sensitivity::{integrate_with_sensitivity, OdeModel, SensitivityProblem};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EstimateError {
    #[error("observation {index} at t = {time} does not lie on the solver grid")]
    TimeMismatch { index: usize, time: f64 },
    #[error("solver produced a non-finite state at θ = {theta:?}")]
    NonFiniteState { theta: Vec<f64> },
    #[error("non-finite cost gradient at θ = {theta:?}")]
    NonFiniteGradient { theta: Vec<f64> },
}

/// Trajectory samples to fit: `values[i][k]` is the measurement of state
/// component `observed_components[k]` at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub observed_components: Vec<usize>,
}

impl Observations {
    /// Full-state observations at the given times.
    pub fn dense(times: Vec<f64>, values: Vec<Vec<f64>>, dim: usize) -> Self {
        Self {
            times,
            values,
            observed_components: (0..dim).collect(),
        }
    }

    fn check_shape(&self) {
        assert_eq!(self.values.len(), self.times.len(), "one value row per time");
        assert!(
            self.times.windows(2).all(|w| w[0] < w[1]),
            "observation times must be strictly ascending"
        );
        assert!(
            self.observed_components.windows(2).all(|w| w[0] < w[1]),
            "observed components must be strictly ascending"
        );
        for row in &self.values {
            assert_eq!(
                row.len(),
                self.observed_components.len(),
                "value row length must match the observed component count"
            );
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Gd,
    Adam,
}

/// Outer-loop settings. `tol` is the absolute target on the sum-of-squares
/// cost; the loop also stops when the relative cost change drops below
/// 1e-10 or after `max_outer_iters` updates.
#[derive(Debug, Clone)]
pub struct EstimationConfig {
    pub theta0: Vec<f64>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub tol: f64,
    pub max_outer_iters: usize,
    pub method: RkMethod,
    pub grid: TimeGrid,
    /// Optimize `ln θ` instead of `θ`, keeping rate constants positive.
    pub log_space: bool,
}

impl EstimationConfig {
    pub fn new(theta0: Vec<f64>, grid: TimeGrid) -> Self {
        Self {
            theta0,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            tol: 1e-6,
            max_outer_iters: 1000,
            method: RkMethod::Rk38,
            grid,
            log_space: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Cost dropped below the configured tolerance.
    CostTol,
    /// Relative cost change fell below 1e-10.
    CostPlateau,
    /// Iteration budget exhausted; the best point seen is returned.
    MaxIters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub log: Vec<IterationRecord>,
}

const PLATEAU_REL_TOL: f64 = 1e-10;

/// Maps each observation time to its solver grid index, rejecting times
/// that miss every grid point by more than a rounding-level slack.
pub fn observation_indices(obs: &Observations, grid: &TimeGrid) -> Result<Vec<usize>, EstimateError> {
    obs.check_shape();
    let mut indices = Vec::with_capacity(obs.times.len());
    for (index, &time) in obs.times.iter().enumerate() {
        let raw = (time - grid.t0()) / grid.h();
        let i = raw.round();
        let mismatch = EstimateError::TimeMismatch { index, time };
        if !(0.0..=grid.n_steps() as f64).contains(&i) {
            return Err(mismatch);
        }
        let i = i as usize;
        if (grid.point(i) - time).abs() > 1e-9 * time.abs().max(1.0) {
            return Err(mismatch);
        }
        indices.push(i);
    }
    Ok(indices)
}

fn residual_from(traj: &Trajectory, obs: &Observations, indices: &[usize]) -> Vec<f64> {
    let k = obs.observed_components.len();
    let mut r = Vec::with_capacity(indices.len() * k);
    for (row, &i) in obs.values.iter().zip(indices) {
        let state = &traj.states[i];
        for (&val, &comp) in row.iter().zip(&obs.observed_components) {
            r.push(val - state[comp]);
        }
    }
    r
}

/// Stacked residual `y_obs − y_pred`, time-major then component order.
pub fn residual<M: OdeModel + ?Sized>(
    tableau: &ButcherTableau,
    model: &M,
    y0: &[f64],
    theta: &[f64],
    obs: &Observations,
    grid: TimeGrid,
) -> Result<Vec<f64>, EstimateError> {
    let indices = observation_indices(obs, &grid)?;
    let traj = crate::sensitivity::integrate_model(tableau, model, y0, theta, grid)
        .map_err(|_| EstimateError::NonFiniteState {
            theta: theta.to_vec(),
        })?;
    Ok(residual_from(&traj, obs, &indices))
}

/// Sum of squared residual entries.
pub fn cost(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Fits `theta` by gradient descent or Adam on the sum-of-squares cost,
/// with `∇J = −2 Σ_i S(t_i)ᵀ r_i` from forward sensitivities. Returns the
/// best point seen, never a worse one than `theta0`.
pub fn estimate_parameters<M: OdeModel + ?Sized>(
    model: &M,
    y0: &[f64],
    obs: &Observations,
    cfg: &EstimationConfig,
) -> Result<EstimationResult, EstimateError> {
    assert_eq!(cfg.theta0.len(), model.param_dim(), "θ0 has wrong dimension");
    let indices = observation_indices(obs, &cfg.grid)?;
    let tableau = ButcherTableau::new(cfg.method);
    let p = model.param_dim();

    // Internal optimizer coordinates: either θ itself or ln θ.
    let to_theta = |z: &[f64]| -> Vec<f64> {
        if cfg.log_space {
            z.iter().map(|x| x.exp()).collect()
        } else {
            z.to_vec()
        }
    };
    let mut z: Vec<f64> = if cfg.log_space {
        assert!(
            cfg.theta0.iter().all(|&x| x > 0.0),
            "log-space estimation needs a strictly positive θ0"
        );
        cfg.theta0.iter().map(|x| x.ln()).collect()
    } else {
        cfg.theta0.clone()
    };

    let mut adam = match cfg.optimizer {
        OptimizerKind::Adam => Some(AdamState::new(z.clone(), cfg.learning_rate)),
        OptimizerKind::Gd => None,
    };

    let mut log = Vec::new();
    let mut best_theta = cfg.theta0.clone();
    let mut best_cost = f64::INFINITY;
    let mut prev_cost: Option<f64> = None;

    for k in 0..=cfg.max_outer_iters {
        let theta = to_theta(&z);
        let problem = SensitivityProblem {
            model,
            y0: y0.to_vec(),
            params: theta.clone(),
            grid: cfg.grid,
        };
        let st = integrate_with_sensitivity(&tableau, &problem)
            .map_err(|_| EstimateError::NonFiniteState {
                theta: theta.clone(),
            })?;
        let r = residual_from(&st.base, obs, &indices);
        let j = cost(&r);
        if j < best_cost {
            best_cost = j;
            best_theta = theta.clone();
        }

        let mut grad = vec![0.0; p];
        let k_obs = obs.observed_components.len();
        for (row, &gi) in indices.iter().enumerate() {
            let s = &st.sens[gi];
            for (col, &comp) in obs.observed_components.iter().enumerate() {
                let w = -2.0 * r[row * k_obs + col];
                for (jp, g) in grad.iter_mut().enumerate() {
                    *g += s[(comp, jp)] * w;
                }
            }
        }
        if cfg.log_space {
            for (g, &t) in grad.iter_mut().zip(&theta) {
                *g *= t;
            }
        }
        if !grad.iter().all(|x| x.is_finite()) {
            return Err(EstimateError::NonFiniteGradient { theta });
        }
        let grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        log.push(IterationRecord {
            iteration: k,
            cost: j,
            grad_norm,
        });

        let stop = if j < cfg.tol {
            Some(StopReason::CostTol)
        } else if prev_cost.is_some_and(|jp| {
            (jp - j).abs() < PLATEAU_REL_TOL * jp.abs().max(j.abs()).max(1e-300)
        }) {
            Some(StopReason::CostPlateau)
        } else if k == cfg.max_outer_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(EstimationResult {
                theta: best_theta,
                cost: best_cost,
                iterations: k,
                stop,
                log,
            });
        }
        prev_cost = Some(j);

        match cfg.optimizer {
            OptimizerKind::Gd => {
                for (zi, g) in z.iter_mut().zip(&grad) {
                    *zi -= cfg.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                let state = adam.take().expect("adam state present");
                let state = adam_step(state, &grad).map_err(|e| match e {
                    // Finiteness was checked above; adam_step cannot see a
                    // non-finite gradient here.
                    OptimizeError::NonFiniteGradient { .. } => {
                        EstimateError::NonFiniteGradient {
                            theta: to_theta(&z),
                        }
                    }
                    _ => unreachable!("adam_step only reports gradient issues"),
                })?;
                z.copy_from_slice(&state.theta);
                adam = Some(state);
            }
        }
    }
    unreachable!("loop always returns through a stop reason");
}
