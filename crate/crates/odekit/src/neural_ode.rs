//! A small MLP as a trainable ODE right-hand side: tanh hidden layers,
//! linear output, analytic jacobians feeding the forward-sensitivity solver,
//! and a full-batch Adam training loop against a reference trajectory.
//!
//! The network maps state to state derivative (both 2-dimensional here):
//! `f(y) = W3 tanh(W2 tanh(W1 y + b1) + b2) + b3`. Parameters live in one
//! flat vector ordered `[W1 | b1 | W2 | b2 | W3 | b3]`, weights row-major.

use std::cell::RefCell;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::models::{DampedOscillator, OscillatorParams};
use crate::ode::{ButcherTableau, OdeError, RkMethod, TimeGrid, Trajectory};
use crate::optimize::{adam_minimize, OptimizeError};
use crate::sensitivity::{
    integrate_model, integrate_with_sensitivity, OdeModel, SensitivityProblem,
};

const IN_DIM: usize = 2;
const OUT_DIM: usize = 2;

/// Flat parameter block offsets for a given hidden width.
#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    len: usize,
}

impl Layout {
    fn new(h: usize) -> Self {
        assert!(h >= 1, "hidden width must be positive");
        let b1 = IN_DIM * h;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + OUT_DIM * h;
        Self {
            h,
            b1,
            w2,
            b2,
            w3,
            b3,
            len: b3 + OUT_DIM,
        }
    }
}

/// MLP weights in a single flat vector; flattening is the identity, so
/// round-trips are trivially exact.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    hidden: usize,
    theta: Vec<f64>,
}

impl MlpParams {
    /// Flat parameter count for a hidden width: `h² + 6h + 2`.
    pub fn dim(hidden: usize) -> usize {
        Layout::new(hidden).len
    }

    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            theta: vec![0.0; Self::dim(hidden)],
        }
    }

    pub fn from_flat(hidden: usize, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), Self::dim(hidden), "flat vector has wrong length");
        assert!(theta.iter().all(|x| x.is_finite()), "parameters must be finite");
        Self { hidden, theta }
    }

    /// Layer-wise uniform(−s, s) with s = 1/√fan_in, drawn in flat order.
    pub fn seeded_init(hidden: usize, rng: &mut impl Rng) -> Self {
        let lay = Layout::new(hidden);
        let s_in = 1.0 / (IN_DIM as f64).sqrt();
        let s_hid = 1.0 / (hidden as f64).sqrt();
        let mut theta = Vec::with_capacity(lay.len);
        for i in 0..lay.len {
            let s = if i < lay.w2 { s_in } else { s_hid };
            theta.push(rng.random_range(-s..s));
        }
        Self { hidden, theta }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.theta
    }

    pub fn w1(&self) -> &[f64] {
        &self.theta[..Layout::new(self.hidden).b1]
    }

    pub fn b1(&self) -> &[f64] {
        let l = Layout::new(self.hidden);
        &self.theta[l.b1..l.w2]
    }

    pub fn w2(&self) -> &[f64] {
        let l = Layout::new(self.hidden);
        &self.theta[l.w2..l.b2]
    }

    pub fn b2(&self) -> &[f64] {
        let l = Layout::new(self.hidden);
        &self.theta[l.b2..l.w3]
    }

    pub fn w3(&self) -> &[f64] {
        let l = Layout::new(self.hidden);
        &self.theta[l.w3..l.b3]
    }

    pub fn b3(&self) -> &[f64] {
        let l = Layout::new(self.hidden);
        &self.theta[l.b3..]
    }
}

/// Post-activation values reused by the jacobian passes.
struct Scratch {
    a1: Vec<f64>,
    a2: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    m: Vec<f64>,
}

impl Scratch {
    fn new(h: usize) -> Self {
        Self {
            a1: vec![0.0; h],
            a2: vec![0.0; h],
            d1: vec![0.0; h],
            d2: vec![0.0; h],
            m: vec![0.0; IN_DIM * h],
        }
    }
}

fn forward_into(lay: Layout, theta: &[f64], y: &[f64], a1: &mut [f64], a2: &mut [f64], out: &mut [f64]) {
    let h = lay.h;
    for i in 0..h {
        let z = theta[lay.b1 + i] + theta[IN_DIM * i] * y[0] + theta[IN_DIM * i + 1] * y[1];
        a1[i] = z.tanh();
    }
    for i in 0..h {
        let row = &theta[lay.w2 + h * i..lay.w2 + h * (i + 1)];
        let mut z = theta[lay.b2 + i];
        for (w, a) in row.iter().zip(a1.iter()) {
            z += w * a;
        }
        a2[i] = z.tanh();
    }
    for r in 0..OUT_DIM {
        let row = &theta[lay.w3 + h * r..lay.w3 + h * (r + 1)];
        let mut z = theta[lay.b3 + r];
        for (w, a) in row.iter().zip(a2.iter()) {
            z += w * a;
        }
        out[r] = z;
    }
}

/// The MLP viewed as an autonomous ODE model over its flat parameters.
pub struct MlpField {
    hidden: usize,
    scratch: RefCell<Scratch>,
}

impl MlpField {
    pub fn new(hidden: usize) -> Self {
        Self {
            hidden,
            scratch: RefCell::new(Scratch::new(hidden)),
        }
    }
}

impl OdeModel for MlpField {
    fn state_dim(&self) -> usize {
        IN_DIM
    }

    fn param_dim(&self) -> usize {
        MlpParams::dim(self.hidden)
    }

    fn rhs(&self, _t: f64, y: &[f64], params: &[f64], dydt: &mut [f64]) {
        let lay = Layout::new(self.hidden);
        let s = &mut *self.scratch.borrow_mut();
        forward_into(lay, params, y, &mut s.a1, &mut s.a2, dydt);
    }

    // ∂f/∂y = W3 D2 W2 D1 W1 with D = diag(1 − a²), accumulated as two
    // h×2 products so no h×h intermediate is formed.
    fn jac_state(&self, _t: f64, y: &[f64], params: &[f64], out: &mut DMatrix<f64>) {
        let lay = Layout::new(self.hidden);
        let h = lay.h;
        let s = &mut *self.scratch.borrow_mut();
        let mut f = [0.0; OUT_DIM];
        forward_into(lay, params, y, &mut s.a1, &mut s.a2, &mut f);
        for i in 0..h {
            let d = 1.0 - s.a1[i] * s.a1[i];
            s.m[IN_DIM * i] = d * params[IN_DIM * i];
            s.m[IN_DIM * i + 1] = d * params[IN_DIM * i + 1];
        }
        // d1 is repurposed per input column for the second-layer product.
        for j in 0..IN_DIM {
            for i in 0..h {
                let row = &params[lay.w2 + h * i..lay.w2 + h * (i + 1)];
                let mut acc = 0.0;
                for (k, w) in row.iter().enumerate() {
                    acc += w * s.m[IN_DIM * k + j];
                }
                s.d1[i] = (1.0 - s.a2[i] * s.a2[i]) * acc;
            }
            for r in 0..OUT_DIM {
                let row = &params[lay.w3 + h * r..lay.w3 + h * (r + 1)];
                let mut acc = 0.0;
                for (w, d) in row.iter().zip(s.d1.iter()) {
                    acc += w * d;
                }
                out[(r, j)] = acc;
            }
        }
    }

    // One reverse pass per output row: δ3 = e_r, δ2 = W3ᵀδ3 ⊙ (1−a2²),
    // δ1 = W2ᵀδ2 ⊙ (1−a1²); weight blocks get δ ⊗ activation.
    fn jac_params(&self, _t: f64, y: &[f64], params: &[f64], out: &mut DMatrix<f64>) {
        let lay = Layout::new(self.hidden);
        let h = lay.h;
        let s = &mut *self.scratch.borrow_mut();
        let mut f = [0.0; OUT_DIM];
        forward_into(lay, params, y, &mut s.a1, &mut s.a2, &mut f);
        out.fill(0.0);
        for r in 0..OUT_DIM {
            out[(r, lay.b3 + r)] = 1.0;
            for c in 0..h {
                out[(r, lay.w3 + h * r + c)] = s.a2[c];
            }
            for i in 0..h {
                s.d2[i] = params[lay.w3 + h * r + i] * (1.0 - s.a2[i] * s.a2[i]);
                out[(r, lay.b2 + i)] = s.d2[i];
            }
            for i in 0..h {
                for j in 0..h {
                    out[(r, lay.w2 + h * i + j)] = s.d2[i] * s.a1[j];
                }
            }
            for k in 0..h {
                let mut acc = 0.0;
                for i in 0..h {
                    acc += s.d2[i] * params[lay.w2 + h * i + k];
                }
                s.d1[k] = acc * (1.0 - s.a1[k] * s.a1[k]);
                out[(r, lay.b1 + k)] = s.d1[k];
                out[(r, IN_DIM * k)] = s.d1[k] * y[0];
                out[(r, IN_DIM * k + 1)] = s.d1[k] * y[1];
            }
        }
    }
}

/// Single forward evaluation of the network.
pub fn mlp_forward(p: &MlpParams, y: &[f64]) -> [f64; 2] {
    assert_eq!(y.len(), IN_DIM);
    let lay = Layout::new(p.hidden);
    let mut a1 = vec![0.0; lay.h];
    let mut a2 = vec![0.0; lay.h];
    let mut out = [0.0; OUT_DIM];
    forward_into(lay, &p.theta, y, &mut a1, &mut a2, &mut out);
    out
}

/// Analytic `(∂f/∂y, ∂f/∂θ)` at one point.
pub fn mlp_jacobians(p: &MlpParams, y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let field = MlpField::new(p.hidden);
    (
        field.jac_state_owned(0.0, y, &p.theta),
        field.jac_params_owned(0.0, y, &p.theta),
    )
}

/// Training settings; the defaults are the canonical run (32 hidden units,
/// Adam at 0.01 for 1000 epochs, rk38).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub method: RkMethod,
}

impl NodeTrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            hidden: 32,
            learning_rate: 0.01,
            epochs: 1000,
            seed,
            method: RkMethod::Rk38,
        }
    }
}

/// Mean-squared-error training loss of the network solve against `data`
/// (same grid, same initial state), plus its parameter gradient from
/// forward sensitivities.
pub fn mse_loss_and_grad(
    tableau: &ButcherTableau,
    data: &Trajectory,
    hidden: usize,
    theta: &[f64],
) -> Result<(f64, Vec<f64>), OdeError> {
    let field = MlpField::new(hidden);
    let problem = SensitivityProblem {
        model: &field,
        y0: data.states[0].clone(),
        params: theta.to_vec(),
        grid: data.grid,
    };
    let st = integrate_with_sensitivity(tableau, &problem)?;
    let p = theta.len();
    let denom = (data.states.len() * OUT_DIM) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p];
    for (i, (pred, truth)) in st.base.states.iter().zip(&data.states).enumerate() {
        let s = &st.sens[i];
        for r in 0..OUT_DIM {
            let e = pred[r] - truth[r];
            loss += e * e / denom;
            let w = 2.0 * e / denom;
            for j in 0..p {
                grad[j] += s[(r, j)] * w;
            }
        }
    }
    Ok((loss, grad))
}

/// Fits the network to `data` by full-batch Adam; returns the trained
/// parameters and the loss recorded at the start of every epoch.
pub fn train_neural_ode(
    data: &Trajectory,
    cfg: &NodeTrainConfig,
) -> Result<(MlpParams, Vec<f64>), OptimizeError> {
    assert_eq!(data.dim(), IN_DIM, "training data must be 2-dimensional");
    let tableau = ButcherTableau::new(cfg.method);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let theta0 = MlpParams::seeded_init(cfg.hidden, &mut rng);
    let p = theta0.theta.len();
    let objective = |theta: &[f64]| match mse_loss_and_grad(&tableau, data, cfg.hidden, theta) {
        Ok(pair) => pair,
        // A diverged solve surfaces as a non-finite gradient at this epoch.
        Err(_) => (f64::NAN, vec![f64::NAN; p]),
    };
    let (theta, history) = adam_minimize(objective, &theta0.theta, cfg.learning_rate, cfg.epochs)?;
    Ok((MlpParams::from_flat(cfg.hidden, theta), history))
}

/// Plain solve of the trained field from `y0` over `grid`.
pub fn extrapolate(
    tableau: &ButcherTableau,
    p: &MlpParams,
    y0: &[f64],
    grid: TimeGrid,
) -> Result<Trajectory, OdeError> {
    integrate_model(tableau, &MlpField::new(p.hidden), y0, &p.theta, grid)
}

/// The canonical training trajectory: the damped oscillator (k = 1,
/// b = 0.1) from (0.99, −0.99) over t ∈ [0, 30] in 100 steps.
pub fn oscillator_dataset(tableau: &ButcherTableau) -> Trajectory {
    let params = OscillatorParams { k: 1.0, b: 0.1 }.to_vec();
    let grid = TimeGrid::new(0.0, 30.0, 100).expect("static grid is valid");
    integrate_model(tableau, &DampedOscillator, &[0.99, -0.99], &params, grid)
        .expect("oscillator stays finite")
}
