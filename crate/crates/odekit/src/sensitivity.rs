//! Forward sensitivity analysis.
//!
//! For `dy/dt = f(t, y, θ)` the sensitivity matrix `S(t) = ∂y(t)/∂θ`
//! satisfies `dS/dt = (∂f/∂y) S + ∂f/∂θ` with `S(t0) = 0` for fixed initial
//! conditions. [`integrate_with_sensitivity`] solves state and sensitivities
//! as one augmented system on the same tableau and grid, so the state part
//! of the result is bit-identical to a plain [`integrate`] of the base
//! problem.
//!
//! Models plug in through [`OdeModel`], which pairs the right-hand side with
//! hand-written Jacobians; [`finite_difference_gradient`] is the independent
//! cross-check used throughout the test suites.

use std::cell::RefCell;

use nalgebra::DMatrix;

use crate::ode::{integrate, ButcherTableau, IvpProblem, OdeError, TimeGrid, Trajectory};

/// A parameterized vector field with analytic Jacobians in state and
/// parameters. `rhs` and the Jacobian writers must be pure.
pub trait OdeModel {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;

    /// Writes `f(t, y, params)` into `dydt` (length `state_dim`).
    fn rhs(&self, t: f64, y: &[f64], params: &[f64], dydt: &mut [f64]);

    /// Writes `∂f/∂y` into `out` (`state_dim x state_dim`).
    fn jac_state(&self, t: f64, y: &[f64], params: &[f64], out: &mut DMatrix<f64>);

    /// Writes `∂f/∂θ` into `out` (`state_dim x param_dim`).
    fn jac_params(&self, t: f64, y: &[f64], params: &[f64], out: &mut DMatrix<f64>);

    fn jac_state_owned(&self, t: f64, y: &[f64], params: &[f64]) -> DMatrix<f64> {
        let d = self.state_dim();
        let mut m = DMatrix::zeros(d, d);
        self.jac_state(t, y, params, &mut m);
        m
    }

    fn jac_params_owned(&self, t: f64, y: &[f64], params: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.state_dim(), self.param_dim());
        self.jac_params(t, y, params, &mut m);
        m
    }
}

/// Base problem plus the metadata needed to differentiate it.
pub struct SensitivityProblem<'m, M: ?Sized> {
    pub model: &'m M,
    pub y0: Vec<f64>,
    pub params: Vec<f64>,
    pub grid: TimeGrid,
}

/// Solver output with one `dim x p` sensitivity matrix per grid point.
/// `sens[0]` is always the zero matrix.
#[derive(Debug, Clone)]
pub struct SensitivityTrajectory {
    pub base: Trajectory,
    pub sens: Vec<DMatrix<f64>>,
}

/// Plain solve of a model at the given parameters.
pub fn integrate_model<M: OdeModel + ?Sized>(
    tableau: &ButcherTableau,
    model: &M,
    y0: &[f64],
    params: &[f64],
    grid: TimeGrid,
) -> Result<Trajectory, OdeError> {
    let problem = IvpProblem {
        rhs: |t: f64, y: &[f64], p: &[f64], dydt: &mut [f64]| model.rhs(t, y, p, dydt),
        y0: y0.to_vec(),
        params: params.to_vec(),
        grid,
    };
    integrate(tableau, &problem)
}

/// Model solve that stores only every `stride`-th state; see
/// [`crate::ode::integrate_keep`].
pub fn integrate_model_keep<M: OdeModel + ?Sized>(
    tableau: &ButcherTableau,
    model: &M,
    y0: &[f64],
    params: &[f64],
    grid: TimeGrid,
    stride: usize,
) -> Result<Vec<(usize, Vec<f64>)>, OdeError> {
    let problem = IvpProblem {
        rhs: |t: f64, y: &[f64], p: &[f64], dydt: &mut [f64]| model.rhs(t, y, p, dydt),
        y0: y0.to_vec(),
        params: params.to_vec(),
        grid,
    };
    crate::ode::integrate_keep(tableau, &problem, stride)
}

/// Solves the augmented system `dy/dt = f`, `dS/dt = (∂f/∂y) S + ∂f/∂θ`.
///
/// Augmented layout is `[y | S]` with `S` stored column by column, so the
/// state components go through exactly the same arithmetic as a standalone
/// solve of the base problem.
pub fn integrate_with_sensitivity<M: OdeModel + ?Sized>(
    tableau: &ButcherTableau,
    problem: &SensitivityProblem<'_, M>,
) -> Result<SensitivityTrajectory, OdeError> {
    let model = problem.model;
    let dim = model.state_dim();
    let p = model.param_dim();
    assert_eq!(problem.y0.len(), dim, "initial state has wrong dimension");
    assert_eq!(problem.params.len(), p, "parameter vector has wrong dimension");

    let jacs = RefCell::new((DMatrix::zeros(dim, dim), DMatrix::zeros(dim, p)));
    let rhs = |t: f64, z: &[f64], params: &[f64], dz: &mut [f64]| {
        let (y, s) = z.split_at(dim);
        let (dy, ds) = dz.split_at_mut(dim);
        model.rhs(t, y, params, dy);
        let (ref mut jy, ref mut jp) = *jacs.borrow_mut();
        model.jac_state(t, y, params, jy);
        model.jac_params(t, y, params, jp);
        for j in 0..p {
            let sj = &s[j * dim..(j + 1) * dim];
            let dsj = &mut ds[j * dim..(j + 1) * dim];
            for r in 0..dim {
                let mut acc = jp[(r, j)];
                for (k, &sk) in sj.iter().enumerate() {
                    acc += jy[(r, k)] * sk;
                }
                dsj[r] = acc;
            }
        }
    };

    let mut z0 = vec![0.0; dim * (p + 1)];
    z0[..dim].copy_from_slice(&problem.y0);
    let augmented = IvpProblem {
        rhs,
        y0: z0,
        params: problem.params.clone(),
        grid: problem.grid,
    };
    let traj = integrate(tableau, &augmented)?;

    let mut states = Vec::with_capacity(traj.states.len());
    let mut sens = Vec::with_capacity(traj.states.len());
    for z in &traj.states {
        states.push(z[..dim].to_vec());
        sens.push(DMatrix::from_column_slice(dim, p, &z[dim..]));
    }
    Ok(SensitivityTrajectory {
        base: Trajectory {
            grid: traj.grid,
            states,
        },
        sens,
    })
}

/// Chain-rule gradient of a scalar trajectory loss: `Σ_i S(t_i)ᵀ g_i` where
/// `loss_grad` supplies `g_i = ∂L/∂y(t_i)`, one vector per grid point.
pub fn grad_scalar_loss<M: OdeModel + ?Sized, L>(
    tableau: &ButcherTableau,
    problem: &SensitivityProblem<'_, M>,
    loss_grad: L,
) -> Result<Vec<f64>, OdeError>
where
    L: FnOnce(&Trajectory) -> Vec<Vec<f64>>,
{
    let st = integrate_with_sensitivity(tableau, problem)?;
    let dim = problem.model.state_dim();
    let p = problem.model.param_dim();
    let gs = loss_grad(&st.base);
    assert_eq!(gs.len(), st.base.states.len(), "one loss gradient per grid point");

    let mut grad = vec![0.0; p];
    for (s, g) in st.sens.iter().zip(&gs) {
        assert_eq!(g.len(), dim, "loss gradient has wrong dimension");
        for j in 0..p {
            let mut acc = 0.0;
            for (r, &gr) in g.iter().enumerate() {
                acc += s[(r, j)] * gr;
            }
            grad[j] += acc;
        }
    }
    Ok(grad)
}

/// Central-difference gradient `(cost(θ+εe_i) − cost(θ−εe_i)) / 2ε`.
/// Deliberately knows nothing about solvers; used as the oracle against
/// sensitivity-based gradients.
pub fn finite_difference_gradient<E>(
    mut cost: impl FnMut(&[f64]) -> Result<f64, E>,
    theta: &[f64],
    eps: f64,
) -> Result<Vec<f64>, E> {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut grad = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = cost(&probe)?;
        probe[i] = theta[i] - eps;
        let down = cost(&probe)?;
        probe[i] = theta[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}
