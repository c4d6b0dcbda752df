//! Empirical convergence orders on dy/dt = -y, y(0) = 1, whose exact
//! solution e^{-t} pins the error without any reference solve.

use odekit::ode::{integrate, ButcherTableau, IvpProblem, RkMethod, TimeGrid};

fn endpoint_error(method: RkMethod, n_steps: usize) -> f64 {
    let tableau = ButcherTableau::new(method);
    let problem = IvpProblem {
        rhs: |_t: f64, y: &[f64], _p: &[f64], dydt: &mut [f64]| dydt[0] = -y[0],
        y0: vec![1.0],
        params: vec![],
        grid: TimeGrid::new(0.0, 1.0, n_steps).unwrap(),
    };
    let traj = integrate(&tableau, &problem).unwrap();
    (traj.final_state()[0] - (-1.0f64).exp()).abs()
}

/// Least-squares slope of ln(error) against ln(h) over a step-halving sweep.
fn empirical_order(method: RkMethod) -> f64 {
    let ns = [16usize, 32, 64, 128, 256];
    let points: Vec<(f64, f64)> = ns
        .iter()
        .map(|&n| ((1.0 / n as f64).ln(), endpoint_error(method, n).ln()))
        .collect();
    let m = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

#[test]
fn euler_slope_is_first_order() {
    let slope = empirical_order(RkMethod::Euler);
    assert!(
        (slope - 1.0).abs() <= 0.2,
        "euler slope {slope} outside 1.0 +/- 0.2"
    );
}

#[test]
fn rk4_slope_is_fourth_order() {
    let slope = empirical_order(RkMethod::Rk4);
    assert!(
        (slope - 4.0).abs() <= 0.3,
        "rk4 slope {slope} outside 4.0 +/- 0.3"
    );
}

#[test]
fn rk38_slope_is_fourth_order() {
    let slope = empirical_order(RkMethod::Rk38);
    assert!(
        (slope - 4.0).abs() <= 0.3,
        "rk38 slope {slope} outside 4.0 +/- 0.3"
    );
}

#[test]
fn halving_the_step_divides_euler_error_by_about_two() {
    let coarse = endpoint_error(RkMethod::Euler, 100);
    let fine = endpoint_error(RkMethod::Euler, 200);
    let ratio = coarse / fine;
    assert!(
        (1.8..=2.2).contains(&ratio),
        "error ratio {ratio} is not close to 2"
    );
}
