//! Scalar-cost minimizers and fixed-point acceleration.
//!
//! Gradient descent and Adam drive parameter estimation and Neural ODE
//! training; Anderson acceleration speeds up fixed-point iterations
//! `x_{k+1} = G(x_k)`. Everything here is deterministic and keeps its state
//! in explicit values, so independent runs can proceed concurrently.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptimizeError {
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },
    #[error("epochs must be >= 1")]
    ZeroEpochs,
    #[error("no convergence within budget; best residual {}", best.residual_norm)]
    NoConvergence { best: FixedPointResult },
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Plain gradient descent with a gradient-norm stopping test.
#[derive(Debug, Clone, Copy)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl GdConfig {
    pub fn new(learning_rate: f64, max_iters: usize) -> Self {
        Self {
            learning_rate,
            max_iters,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdResult {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
}

/// Iterates `θ ← θ − α ∇f(θ)` until the gradient norm drops below
/// `grad_tol` or the budget runs out. Returns the best-seen point by cost.
pub fn gd_minimize(
    mut cost_and_grad: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    theta0: &[f64],
    cfg: &GdConfig,
) -> Result<GdResult, OptimizeError> {
    assert!(cfg.learning_rate > 0.0 && cfg.grad_tol > 0.0, "invalid gd config");
    let mut theta = theta0.to_vec();
    let mut best_theta = theta.clone();
    let mut best_cost = f64::INFINITY;
    for k in 0..=cfg.max_iters {
        let (cost, grad) = cost_and_grad(&theta);
        if !all_finite(&grad) {
            return Err(OptimizeError::NonFiniteGradient { iteration: k });
        }
        if cost < best_cost {
            best_cost = cost;
            best_theta.copy_from_slice(&theta);
        }
        if norm2(&grad) < cfg.grad_tol || k == cfg.max_iters {
            return Ok(GdResult {
                theta: best_theta,
                cost: best_cost,
                iterations: k,
            });
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= cfg.learning_rate * g;
        }
    }
    unreachable!("loop always returns")
}

/// Adam optimizer state. Moments start at zero; `step_count` counts applied
/// updates and drives bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Standard defaults: β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(theta: Vec<f64>, alpha: f64) -> Self {
        let p = theta.len();
        Self {
            theta,
            m: vec![0.0; p],
            v: vec![0.0; p],
            step_count: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam update with bias-corrected moments:
/// `m ← β1 m + (1−β1) g`, `v ← β2 v + (1−β2) g²`,
/// `θ ← θ − α m̂ / (√v̂ + ε)`.
pub fn adam_step(mut state: AdamState, grad: &[f64]) -> Result<AdamState, OptimizeError> {
    assert_eq!(grad.len(), state.theta.len(), "gradient has wrong dimension");
    if !all_finite(grad) {
        return Err(OptimizeError::NonFiniteGradient {
            iteration: state.step_count,
        });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..grad.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        state.theta[i] -= state.alpha * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(state)
}

/// Full-batch Adam loop: one `adam_step` per epoch. Returns the final θ and
/// the cost recorded at the start of every epoch.
pub fn adam_minimize(
    mut cost_and_grad: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    theta0: &[f64],
    alpha: f64,
    epochs: usize,
) -> Result<(Vec<f64>, Vec<f64>), OptimizeError> {
    if epochs == 0 {
        return Err(OptimizeError::ZeroEpochs);
    }
    let mut state = AdamState::new(theta0.to_vec(), alpha);
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (cost, grad) = cost_and_grad(&state.theta);
        history.push(cost);
        state = adam_step(state, &grad).map_err(|e| match e {
            OptimizeError::NonFiniteGradient { .. } => {
                OptimizeError::NonFiniteGradient { iteration: epoch }
            }
            other => other,
        })?;
    }
    Ok((state.theta, history))
}

/// Anderson acceleration settings. `window` is the number of retained
/// iterates; `mixing` is the damping β applied to the combined update.
#[derive(Debug, Clone, Copy)]
pub struct AndersonConfig {
    pub window: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub mixing: f64,
}

impl Default for AndersonConfig {
    fn default() -> Self {
        Self {
            window: 5,
            tol: 1e-12,
            max_iters: 1000,
            mixing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Plain fixed-point iteration `x_{k+1} = G(x_k)`, the baseline Anderson is
/// measured against.
pub fn fixed_point_iterate(
    mut g: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<FixedPointResult, OptimizeError> {
    assert!(tol > 0.0);
    let mut x = x0.to_vec();
    let mut best: Option<FixedPointResult> = None;
    for k in 0..=max_iters {
        let gx = g(&x);
        assert_eq!(gx.len(), x.len(), "G must preserve dimension");
        let r = norm2(&gx.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
        if r <= tol {
            return Ok(FixedPointResult {
                x,
                iterations: k,
                residual_norm: r,
            });
        }
        if best.as_ref().is_none_or(|b| r < b.residual_norm) {
            best = Some(FixedPointResult {
                x: x.clone(),
                iterations: k,
                residual_norm: r,
            });
        }
        if k == max_iters {
            break;
        }
        x = gx;
    }
    Err(OptimizeError::NoConvergence {
        best: best.expect("at least one iterate was recorded"),
    })
}

/// Type-II Anderson acceleration with damping.
///
/// Keeps the last `min(window, k)` iterates, finds the affine combination of
/// their residuals `f_i = G(x_i) − x_i` with least-squares-minimal norm, and
/// steps to `x_{k+1} = Σ γ_i ((1−β) x_i + β G(x_i))`. A rank-deficient
/// least-squares system falls back to plain iteration for that step.
pub fn anderson_accelerate(
    mut g: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &AndersonConfig,
) -> Result<FixedPointResult, OptimizeError> {
    assert!(cfg.window >= 1 && cfg.tol > 0.0, "invalid anderson config");
    assert!(cfg.mixing > 0.0 && cfg.mixing <= 1.0, "mixing must lie in (0, 1]");
    let n = x0.len();
    let beta = cfg.mixing;

    let mut xs: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.window);
    let mut gs: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.window);
    let mut fs: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.window);

    let mut x = x0.to_vec();
    let mut best: Option<FixedPointResult> = None;
    for k in 0..=cfg.max_iters {
        let gx = g(&x);
        assert_eq!(gx.len(), n, "G must preserve dimension");
        let f: Vec<f64> = gx.iter().zip(&x).map(|(a, b)| a - b).collect();
        let r = norm2(&f);
        if r <= cfg.tol {
            return Ok(FixedPointResult {
                x,
                iterations: k,
                residual_norm: r,
            });
        }
        if best.as_ref().is_none_or(|b| r < b.residual_norm) {
            best = Some(FixedPointResult {
                x: x.clone(),
                iterations: k,
                residual_norm: r,
            });
        }
        if k == cfg.max_iters {
            break;
        }

        if xs.len() == cfg.window {
            xs.pop_front();
            gs.pop_front();
            fs.pop_front();
        }
        xs.push_back(x);
        gs.push_back(gx);
        fs.push_back(f);

        x = match combine(&xs, &gs, &fs, beta) {
            Some(next) => next,
            // Rank-deficient history: take the plain step.
            None => gs.back().expect("history is non-empty").clone(),
        };
    }
    Err(OptimizeError::NoConvergence {
        best: best.expect("at least one iterate was recorded"),
    })
}

/// Solves the affine-combination least-squares problem over the current
/// history. Returns `None` when the difference matrix is rank-deficient.
fn combine(
    xs: &VecDeque<Vec<f64>>,
    gs: &VecDeque<Vec<f64>>,
    fs: &VecDeque<Vec<f64>>,
    beta: f64,
) -> Option<Vec<f64>> {
    let mk = xs.len();
    let n = xs[0].len();
    if mk == 1 {
        let mut next = vec![0.0; n];
        for i in 0..n {
            next[i] = (1.0 - beta) * xs[0][i] + beta * gs[0][i];
        }
        return Some(next);
    }

    // Parameterize γ by the affine constraint: with d_j = f_j − f_last,
    // Σ γ_i f_i = f_last + D α where γ_j = α_j (j < last), γ_last = 1 − Σ α.
    let cols = mk - 1;
    let f_last = &fs[mk - 1];
    let d = DMatrix::from_fn(n, cols, |r, c| fs[c][r] - f_last[r]);
    let svd = d.svd(true, true);
    let max_sv = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(max_sv.is_finite() && max_sv > 0.0) {
        return None;
    }
    let rank_eps = f64::EPSILON * max_sv * n.max(cols) as f64;
    if svd.rank(rank_eps) < cols {
        return None;
    }
    let rhs = DVector::from_fn(n, |r, _| -f_last[r]);
    let alpha = svd.solve(&rhs, rank_eps).ok()?;

    let mut gamma = vec![0.0; mk];
    let mut sum = 0.0;
    for c in 0..cols {
        gamma[c] = alpha[c];
        sum += alpha[c];
    }
    gamma[mk - 1] = 1.0 - sum;

    let mut next = vec![0.0; n];
    for (j, &gj) in gamma.iter().enumerate() {
        for i in 0..n {
            next[i] += gj * ((1.0 - beta) * xs[j][i] + beta * gs[j][i]);
        }
    }
    next.iter().all(|v| v.is_finite()).then_some(next)
}
