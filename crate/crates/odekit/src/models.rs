//! The analytic model zoo: Lotka-Volterra predator-prey dynamics, a damped
//! harmonic oscillator, and mammillary N-compartment pharmacokinetics.
//!
//! Each model implements [`OdeModel`] with hand-written Jacobians in both
//! state and parameters, so any of them can be pushed through the
//! sensitivity machinery unchanged. Parameter structs define the flat
//! packing order used by estimation and the CLI.

use nalgebra::DMatrix;
use rand::Rng;

use crate::sensitivity::OdeModel;

/// Interaction rates of `dx/dt = αx − βxy`, `dy/dt = γxy − δy`.
/// Flat layout: `[α, β, γ, δ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotkaVolterraParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl LotkaVolterraParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.alpha, self.beta, self.gamma, self.delta]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        assert_eq!(p.len(), 4);
        Self {
            alpha: p[0],
            beta: p[1],
            gamma: p[2],
            delta: p[3],
        }
    }

    /// The coexistence equilibrium `(δ/γ, α/β)`.
    pub fn equilibrium(&self) -> [f64; 2] {
        [self.delta / self.gamma, self.alpha / self.beta]
    }
}

/// Predator-prey dynamics; state is `(x, y)` = (prey, predator).
#[derive(Debug, Clone, Copy, Default)]
pub struct LotkaVolterra;

impl OdeModel for LotkaVolterra {
    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dydt: &mut [f64]) {
        let (x, pred) = (y[0], y[1]);
        let (alpha, beta, gamma, delta) = (p[0], p[1], p[2], p[3]);
        dydt[0] = alpha * x - beta * x * pred;
        dydt[1] = gamma * x * pred - delta * pred;
    }

    fn jac_state(&self, _t: f64, y: &[f64], p: &[f64], out: &mut DMatrix<f64>) {
        let (x, pred) = (y[0], y[1]);
        let (alpha, beta, gamma, delta) = (p[0], p[1], p[2], p[3]);
        out[(0, 0)] = alpha - beta * pred;
        out[(0, 1)] = -beta * x;
        out[(1, 0)] = gamma * pred;
        out[(1, 1)] = gamma * x - delta;
    }

    fn jac_params(&self, _t: f64, y: &[f64], _p: &[f64], out: &mut DMatrix<f64>) {
        let (x, pred) = (y[0], y[1]);
        out.fill(0.0);
        out[(0, 0)] = x;
        out[(0, 1)] = -x * pred;
        out[(1, 2)] = x * pred;
        out[(1, 3)] = -pred;
    }
}

/// Conserved quantity of the exact Lotka-Volterra flow,
/// `V(x, y) = γx − δ ln x + βy − α ln y`. Requires `x, y > 0`.
pub fn lv_invariant(p: &LotkaVolterraParams, x: f64, y: f64) -> f64 {
    p.gamma * x - p.delta * x.ln() + p.beta * y - p.alpha * y.ln()
}

/// Spring constant and damping of `dx/dt = v`, `dv/dt = −kx − bv`.
/// Flat layout: `[k, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    pub k: f64,
    pub b: f64,
}

impl OscillatorParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.k, self.b]
    }
}

/// Damped harmonic oscillator; state is `(x, v)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DampedOscillator;

impl OdeModel for DampedOscillator {
    fn state_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dydt: &mut [f64]) {
        let (x, v) = (y[0], y[1]);
        let (k, b) = (p[0], p[1]);
        dydt[0] = v;
        dydt[1] = -k * x - b * v;
    }

    fn jac_state(&self, _t: f64, _y: &[f64], p: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 0.0;
        out[(0, 1)] = 1.0;
        out[(1, 0)] = -p[0];
        out[(1, 1)] = -p[1];
    }

    fn jac_params(&self, _t: f64, y: &[f64], _p: &[f64], out: &mut DMatrix<f64>) {
        out[(0, 0)] = 0.0;
        out[(0, 1)] = 0.0;
        out[(1, 0)] = -y[0];
        out[(1, 1)] = -y[1];
    }
}

/// Rates of a mammillary compartment system: a central compartment
/// exchanging with `n − 1` peripherals that never talk to each other.
/// Flat layout: `[k_elim, k_out[0..n−1], k_in[0..n−1]]`, length `2n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentParams {
    /// Elimination from the central compartment (the k_10 rate).
    pub k_elim: f64,
    /// Central to peripheral i (k_12, k_13, ...).
    pub k_out: Vec<f64>,
    /// Peripheral i back to central (k_21, k_31, ...).
    pub k_in: Vec<f64>,
}

impl CompartmentParams {
    pub fn n(&self) -> usize {
        self.k_out.len() + 1
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(2 * self.n() - 1);
        p.push(self.k_elim);
        p.extend_from_slice(&self.k_out);
        p.extend_from_slice(&self.k_in);
        p
    }

    pub fn from_slice(n: usize, p: &[f64]) -> Self {
        assert!(n >= 2, "need at least a central and one peripheral compartment");
        assert_eq!(p.len(), 2 * n - 1, "rate vector has wrong length");
        Self {
            k_elim: p[0],
            k_out: p[1..n].to_vec(),
            k_in: p[n..].to_vec(),
        }
    }

    /// Bolus initial state: the whole dose in the central compartment.
    pub fn loaded_central(n: usize, dose: f64) -> Vec<f64> {
        let mut c = vec![0.0; n];
        c[0] = dose;
        c
    }
}

/// Mammillary star with `n` compartments; state is `(C_1, ..., C_n)`.
#[derive(Debug, Clone, Copy)]
pub struct Mammillary {
    pub n: usize,
}

impl Mammillary {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        Self { n }
    }
}

impl OdeModel for Mammillary {
    fn state_dim(&self) -> usize {
        self.n
    }

    fn param_dim(&self) -> usize {
        2 * self.n - 1
    }

    fn rhs(&self, _t: f64, c: &[f64], p: &[f64], dcdt: &mut [f64]) {
        let n = self.n;
        let (k_elim, k_out, k_in) = (p[0], &p[1..n], &p[n..]);
        let c1 = c[0];
        let mut central = -(k_elim + k_out.iter().sum::<f64>()) * c1;
        for (i, &kin) in k_in.iter().enumerate() {
            central += kin * c[i + 1];
        }
        dcdt[0] = central;
        for i in 0..n - 1 {
            dcdt[i + 1] = k_out[i] * c1 - k_in[i] * c[i + 1];
        }
    }

    fn jac_state(&self, _t: f64, _c: &[f64], p: &[f64], out: &mut DMatrix<f64>) {
        let n = self.n;
        let (k_elim, k_out, k_in) = (p[0], &p[1..n], &p[n..]);
        out.fill(0.0);
        out[(0, 0)] = -(k_elim + k_out.iter().sum::<f64>());
        for i in 0..n - 1 {
            out[(0, i + 1)] = k_in[i];
            out[(i + 1, 0)] = k_out[i];
            out[(i + 1, i + 1)] = -k_in[i];
        }
    }

    fn jac_params(&self, _t: f64, c: &[f64], _p: &[f64], out: &mut DMatrix<f64>) {
        let n = self.n;
        let c1 = c[0];
        out.fill(0.0);
        out[(0, 0)] = -c1;
        for i in 0..n - 1 {
            out[(0, 1 + i)] = -c1; // k_out[i]
            out[(0, n + i)] = c[i + 1]; // k_in[i]
            out[(i + 1, 1 + i)] = c1;
            out[(i + 1, n + i)] = -c[i + 1];
        }
    }
}

/// Uniform draw from the open interval (0, 1); rejects the measure-zero 0.
fn positive_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let v: f64 = rng.random_range(0.0..1.0);
        if v > 0.0 {
            return v;
        }
    }
}

/// Random Lotka-Volterra instance for the benchmark batches: rates uniform
/// in (0, 1), initial prey in [10, 15], initial predators in [5, 10].
pub fn random_lv(rng: &mut impl Rng) -> (LotkaVolterraParams, [f64; 2]) {
    let params = LotkaVolterraParams {
        alpha: positive_unit(rng),
        beta: positive_unit(rng),
        gamma: positive_unit(rng),
        delta: positive_unit(rng),
    };
    let x0 = rng.random_range(10.0..=15.0);
    let y0 = rng.random_range(5.0..=10.0);
    (params, [x0, y0])
}

/// Random mammillary rates, all uniform in (0, 1). Draw order is
/// `k_elim, k_out[..], k_in[..]` so batches are reproducible.
pub fn random_compartments(n: usize, rng: &mut impl Rng) -> CompartmentParams {
    assert!(n >= 2);
    let k_elim = positive_unit(rng);
    let k_out = (0..n - 1).map(|_| positive_unit(rng)).collect();
    let k_in = (0..n - 1).map(|_| positive_unit(rng)).collect();
    CompartmentParams { k_elim, k_out, k_in }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{ButcherTableau, RkMethod, TimeGrid};
    use crate::sensitivity::integrate_model;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canonical_params() -> LotkaVolterraParams {
        LotkaVolterraParams {
            alpha: 1.1,
            beta: 0.4,
            gamma: 0.1,
            delta: 0.4,
        }
    }

    fn eval<M: OdeModel>(m: &M, t: f64, y: &[f64], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; m.state_dim()];
        m.rhs(t, y, p, &mut out);
        out
    }

    /// Central-difference Jacobians, the oracle for every analytic one.
    fn fd_jac_state<M: OdeModel>(m: &M, t: f64, y: &[f64], p: &[f64], eps: f64) -> DMatrix<f64> {
        let d = m.state_dim();
        let mut out = DMatrix::zeros(d, d);
        let mut probe = y.to_vec();
        for j in 0..d {
            probe[j] = y[j] + eps;
            let up = eval(m, t, &probe, p);
            probe[j] = y[j] - eps;
            let down = eval(m, t, &probe, p);
            probe[j] = y[j];
            for r in 0..d {
                out[(r, j)] = (up[r] - down[r]) / (2.0 * eps);
            }
        }
        out
    }

    fn fd_jac_params<M: OdeModel>(m: &M, t: f64, y: &[f64], p: &[f64], eps: f64) -> DMatrix<f64> {
        let (d, np) = (m.state_dim(), m.param_dim());
        let mut out = DMatrix::zeros(d, np);
        let mut probe = p.to_vec();
        for j in 0..np {
            probe[j] = p[j] + eps;
            let up = eval(m, t, y, &probe);
            probe[j] = p[j] - eps;
            let down = eval(m, t, y, &probe);
            probe[j] = p[j];
            for r in 0..d {
                out[(r, j)] = (up[r] - down[r]) / (2.0 * eps);
            }
        }
        out
    }

    fn assert_jacobians_match<M: OdeModel>(m: &M, y: &[f64], p: &[f64], tol: f64) {
        let js = m.jac_state_owned(0.0, y, p);
        let jp = m.jac_params_owned(0.0, y, p);
        let fs = fd_jac_state(m, 0.0, y, p, 1e-6);
        let fp = fd_jac_params(m, 0.0, y, p, 1e-6);
        let scale_s = fs.amax().max(1.0);
        let scale_p = fp.amax().max(1.0);
        assert!((js - fs).amax() <= tol * scale_s, "state Jacobian mismatch");
        assert!((jp - fp).amax() <= tol * scale_p, "parameter Jacobian mismatch");
    }

    #[test]
    fn lv_rhs_known_values() {
        let p = canonical_params().to_vec();
        assert_eq!(eval(&LotkaVolterra, 0.0, &[0.0, 0.0], &p), vec![0.0, 0.0]);

        let d = eval(&LotkaVolterra, 0.0, &[10.0, 5.0], &p);
        assert_relative_eq!(d[0], -9.0, epsilon = 1e-14);
        assert_relative_eq!(d[1], 3.0, epsilon = 1e-14);

        let eq = canonical_params().equilibrium();
        assert_eq!(eq, [4.0, 2.75]);
        let d = eval(&LotkaVolterra, 0.0, &eq, &p);
        assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lv_jacobians_known_structure() {
        let p = canonical_params().to_vec();
        let j = LotkaVolterra.jac_state_owned(0.0, &[0.0, 0.0], &p);
        assert_eq!(j[(0, 0)], 1.1);
        assert_eq!(j[(0, 1)], 0.0);
        assert_eq!(j[(1, 0)], 0.0);
        assert_eq!(j[(1, 1)], -0.4);

        // Every dx/dt parameter partial carries a factor x.
        let jp = LotkaVolterra.jac_params_owned(0.0, &[0.0, 3.0], &p);
        for c in 0..4 {
            assert_eq!(jp[(0, c)], 0.0);
        }
    }

    #[test]
    fn lv_jacobians_match_finite_differences() {
        assert_jacobians_match(&LotkaVolterra, &[10.0, 5.0], &canonical_params().to_vec(), 1e-6);
    }

    #[test]
    fn oscillator_rhs_known_values() {
        let p = OscillatorParams { k: 1.0, b: 0.1 }.to_vec();
        assert_eq!(eval(&DampedOscillator, 0.0, &[0.0, 0.0], &p), vec![0.0, 0.0]);
        let d = eval(&DampedOscillator, 0.0, &[0.99, -0.99], &p);
        assert_relative_eq!(d[0], -0.99, epsilon = 1e-15);
        assert_relative_eq!(d[1], -0.891, epsilon = 1e-15);
    }

    #[test]
    fn undamped_oscillator_energy_is_conserved_by_rk4() {
        let p = OscillatorParams { k: 1.0, b: 0.0 }.to_vec();
        let grid = TimeGrid::new(0.0, 30.0, 3000).unwrap();
        let traj = integrate_model(
            &ButcherTableau::new(RkMethod::Rk4),
            &DampedOscillator,
            &[0.99, -0.99],
            &p,
            grid,
        )
        .unwrap();
        let energy = |s: &[f64]| 0.5 * (s[1] * s[1] + s[0] * s[0]);
        let e0 = energy(&traj.states[0]);
        let max_drift = traj
            .states
            .iter()
            .map(|s| (energy(s) - e0).abs() / e0)
            .fold(0.0f64, f64::max);
        assert!(max_drift <= 1e-6, "energy drift {max_drift}");
    }

    #[test]
    fn oscillator_jacobians_match_finite_differences() {
        assert_jacobians_match(&DampedOscillator, &[0.5, -1.2], &[1.0, 0.1], 1e-6);
    }

    fn paper_rates() -> CompartmentParams {
        CompartmentParams {
            k_elim: 0.1,
            k_out: vec![0.3, 0.2],
            k_in: vec![0.15, 0.1],
        }
    }

    #[test]
    fn compartment_rhs_known_values() {
        let m = Mammillary::new(3);
        let zero_rates = CompartmentParams {
            k_elim: 0.0,
            k_out: vec![0.0, 0.0],
            k_in: vec![0.0, 0.0],
        };
        assert_eq!(
            eval(&m, 0.0, &[1.0, 2.0, 3.0], &zero_rates.to_vec()),
            vec![0.0, 0.0, 0.0]
        );

        let d = eval(&m, 0.0, &[10.0, 0.0, 0.0], &paper_rates().to_vec());
        assert_relative_eq!(d[0], -6.0, epsilon = 1e-14);
        assert_relative_eq!(d[1], 3.0, epsilon = 1e-14);
        assert_relative_eq!(d[2], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_compartment_flux_sums_to_zero() {
        let m = Mammillary::new(3);
        let mut closed = paper_rates();
        closed.k_elim = 0.0;
        let p = closed.to_vec();
        for c in [[10.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.3, 7.7, 4.1]] {
            let d = eval(&m, 0.0, &c, &p);
            assert_abs_diff_eq!(d.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn compartment_jacobians_match_finite_differences() {
        let m = Mammillary::new(3);
        assert_jacobians_match(&m, &[10.0, 1.5, 0.7], &paper_rates().to_vec(), 1e-8);
    }

    #[test]
    fn compartment_jacobian_is_zero_at_zero_rates_and_state() {
        let m = Mammillary::new(3);
        let p = vec![0.0; 5];
        assert_eq!(m.jac_state_owned(0.0, &[0.0; 3], &p).amax(), 0.0);
        assert_eq!(m.jac_params_owned(0.0, &[0.0; 3], &p).amax(), 0.0);
    }

    #[test]
    fn compartment_state_jacobian_does_mass_bookkeeping_columnwise() {
        let m = Mammillary::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let params = random_compartments(4, &mut rng);
            let j = m.jac_state_owned(0.0, &[1.0; 4], &params.to_vec());
            for c in 0..4 {
                let col_sum: f64 = (0..4).map(|r| j[(r, c)]).sum();
                assert!(col_sum <= 1e-15, "column {c} gains mass: {col_sum}");
                let expected = if c == 0 { -params.k_elim } else { 0.0 };
                assert_abs_diff_eq!(col_sum, expected, epsilon = 1e-15);
            }

            let mut closed = params;
            closed.k_elim = 0.0;
            let j = m.jac_state_owned(0.0, &[1.0; 4], &closed.to_vec());
            for c in 0..4 {
                let col_sum: f64 = (0..4).map(|r| j[(r, c)]).sum();
                assert_abs_diff_eq!(col_sum, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let (p, y0) = random_lv(&mut rng);
            assert_jacobians_match(&LotkaVolterra, &y0, &p.to_vec(), 1e-6);

            let cp = random_compartments(5, &mut rng);
            let c: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..10.0)).collect();
            assert_jacobians_match(&Mammillary::new(5), &c, &cp.to_vec(), 1e-6);
        }
    }

    #[test]
    fn parameter_packing_round_trips() {
        let p = paper_rates();
        let flat = p.to_vec();
        assert_eq!(flat, vec![0.1, 0.3, 0.2, 0.15, 0.1]);
        assert_eq!(CompartmentParams::from_slice(3, &flat), p);

        let lv = canonical_params();
        assert_eq!(LotkaVolterraParams::from_slice(&lv.to_vec()), lv);
    }

    #[test]
    fn random_models_are_seeded_and_in_range() {
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let (pa, ya) = random_lv(&mut a);
            let (pb, yb) = random_lv(&mut b);
            assert_eq!(pa, pb);
            assert_eq!(ya, yb);
            for r in pa.to_vec() {
                assert!(r > 0.0 && r < 1.0);
            }
            assert!((10.0..=15.0).contains(&ya[0]));
            assert!((5.0..=10.0).contains(&ya[1]));
        }
        let ca = random_compartments(10, &mut a);
        let cb = random_compartments(10, &mut b);
        assert_eq!(ca, cb);
        assert_eq!(ca.n(), 10);
        assert!(ca.to_vec().iter().all(|&r| r > 0.0 && r < 1.0));
        assert_eq!(CompartmentParams::loaded_central(10, 10.0)[0], 10.0);
        assert_eq!(CompartmentParams::loaded_central(10, 10.0)[1..], [0.0; 9]);
    }
}
