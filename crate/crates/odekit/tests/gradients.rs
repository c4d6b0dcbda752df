//! Sensitivity-based gradients against the central finite-difference oracle
//! for every model family the toolkit differentiates. The loss in all cases
//! is the squared trajectory norm summed over grid points, whose per-point
//! gradient 2·y(t_i) is trivial to supply exactly.

use nalgebra::DMatrix;
use odekit::models::{LotkaVolterra, Mammillary};
use odekit::neural_ode::{mse_loss_and_grad, oscillator_dataset, MlpParams};
use odekit::ode::{ButcherTableau, OdeError, RkMethod, TimeGrid};
use odekit::sensitivity::{
    finite_difference_gradient, grad_scalar_loss, integrate_model, OdeModel, SensitivityProblem,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const REL_TOL: f64 = 1e-4;
const POINTS: usize = 5;

fn squared_norm_cost<M: OdeModel + ?Sized>(
    tableau: &ButcherTableau,
    model: &M,
    y0: &[f64],
    theta: &[f64],
    grid: TimeGrid,
) -> Result<f64, OdeError> {
    let traj = integrate_model(tableau, model, y0, theta, grid)?;
    Ok(traj
        .states
        .iter()
        .map(|s| s.iter().map(|y| y * y).sum::<f64>())
        .sum())
}

fn sensitivity_gradient<M: OdeModel + ?Sized>(
    tableau: &ButcherTableau,
    model: &M,
    y0: &[f64],
    theta: &[f64],
    grid: TimeGrid,
) -> Vec<f64> {
    let problem = SensitivityProblem {
        model,
        y0: y0.to_vec(),
        params: theta.to_vec(),
        grid,
    };
    grad_scalar_loss(tableau, &problem, |traj| {
        traj.states
            .iter()
            .map(|s| s.iter().map(|y| 2.0 * y).collect())
            .collect()
    })
    .unwrap()
}

fn assert_close(label: &str, got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (j, (g, w)) in got.iter().zip(want).enumerate() {
        let scale = w.abs().max(g.abs()).max(1e-12);
        let rel = (g - w).abs() / scale;
        assert!(
            rel <= REL_TOL,
            "{label}: component {j} relative error {rel:.3e} (sensitivity {g}, finite difference {w})"
        );
    }
}

fn check_model<M: OdeModel + ?Sized>(
    label: &str,
    model: &M,
    y0: &[f64],
    grid: TimeGrid,
    theta: &[f64],
    eps: f64,
) {
    let tableau = ButcherTableau::new(RkMethod::Rk4);
    let grad = sensitivity_gradient(&tableau, model, y0, theta, grid);
    let fd = finite_difference_gradient(
        |t: &[f64]| squared_norm_cost(&tableau, model, y0, t, grid),
        theta,
        eps,
    )
    .unwrap();
    assert_close(label, &grad, &fd);
}

#[test]
fn lotka_volterra_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let grid = TimeGrid::new(0.0, 10.0, 1000).unwrap();
    for point in 0..POINTS {
        let theta: Vec<f64> = (0..4).map(|_| rng.random_range(0.1..1.0)).collect();
        check_model(
            &format!("lotka-volterra point {point}"),
            &LotkaVolterra,
            &[10.0, 5.0],
            grid,
            &theta,
            1e-6,
        );
    }
}

#[test]
fn three_compartment_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    let grid = TimeGrid::new(0.0, 5.0, 500).unwrap();
    for point in 0..POINTS {
        let theta: Vec<f64> = (0..5).map(|_| rng.random_range(0.05..1.0)).collect();
        check_model(
            &format!("three-compartment point {point}"),
            &Mammillary::new(3),
            &[10.0, 0.0, 0.0],
            grid,
            &theta,
            1e-6,
        );
    }
}

#[test]
fn reduced_mlp_training_gradients_match_finite_differences() {
    let tableau = ButcherTableau::new(RkMethod::Rk38);
    let data = {
        let full = oscillator_dataset(&tableau);
        // A short window keeps the 2p-solve finite-difference oracle cheap.
        let grid = TimeGrid::new(0.0, 3.0, 10).unwrap();
        odekit::sensitivity::integrate_model(
            &tableau,
            &odekit::models::DampedOscillator,
            &full.states[0],
            &[1.0, 0.1],
            grid,
        )
        .unwrap()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    for point in 0..POINTS {
        let theta = MlpParams::seeded_init(4, &mut rng).into_flat();
        let (_, grad) = mse_loss_and_grad(&tableau, &data, 4, &theta).unwrap();
        let fd = finite_difference_gradient(
            |t: &[f64]| mse_loss_and_grad(&tableau, &data, 4, t).map(|(loss, _)| loss),
            &theta,
            1e-5,
        )
        .unwrap();
        assert_close(&format!("reduced mlp point {point}"), &grad, &fd);
    }
}

/// For dy/dt = A(θ)y with A linear in θ, sensitivities superpose: the
/// directional derivative along θ_a + θ_b equals the sum of the individual
/// directional derivatives.
#[test]
fn linear_system_sensitivities_superpose() {
    struct LinearField;
    impl OdeModel for LinearField {
        fn state_dim(&self) -> usize {
            2
        }
        fn param_dim(&self) -> usize {
            4
        }
        fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dydt: &mut [f64]) {
            dydt[0] = p[0] * y[0] + p[1] * y[1];
            dydt[1] = p[2] * y[0] + p[3] * y[1];
        }
        fn jac_state(&self, _t: f64, _y: &[f64], p: &[f64], out: &mut DMatrix<f64>) {
            out[(0, 0)] = p[0];
            out[(0, 1)] = p[1];
            out[(1, 0)] = p[2];
            out[(1, 1)] = p[3];
        }
        fn jac_params(&self, _t: f64, y: &[f64], _p: &[f64], out: &mut DMatrix<f64>) {
            out.fill(0.0);
            out[(0, 0)] = y[0];
            out[(0, 1)] = y[1];
            out[(1, 2)] = y[0];
            out[(1, 3)] = y[1];
        }
    }

    let tableau = ButcherTableau::new(RkMethod::Rk4);
    let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
    let theta = [-0.5, 0.2, 0.1, -0.3];
    let problem = SensitivityProblem {
        model: &LinearField,
        y0: vec![1.0, -1.0],
        params: theta.to_vec(),
        grid,
    };
    let st = odekit::sensitivity::integrate_with_sensitivity(&tableau, &problem).unwrap();

    let dir_a = [1.0, 0.0, -2.0, 0.0];
    let dir_b = [0.0, 3.0, 1.0, 0.5];
    let combined: Vec<f64> = dir_a.iter().zip(&dir_b).map(|(a, b)| a + b).collect();
    let s = st.sens.last().unwrap();
    for r in 0..2 {
        let along = |d: &[f64]| (0..4).map(|j| s[(r, j)] * d[j]).sum::<f64>();
        let lhs = along(&combined);
        let rhs = along(&dir_a) + along(&dir_b);
        assert!(
            (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0),
            "superposition violated in component {r}: {lhs} vs {rhs}"
        );
    }
}
