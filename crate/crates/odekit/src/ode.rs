//! Explicit fixed-step Runge-Kutta integration.
//!
//! A solver run is described by a [`ButcherTableau`], an [`IvpProblem`]
//! (right-hand side, initial state, parameter vector) and a [`TimeGrid`].
//! Step size is always derived from the grid as `h = (t1 - t0) / n_steps`;
//! grid points are computed as `t0 + i * h` rather than by accumulation so
//! reruns and restarts land on identical abscissae.
//!
//! Everything is `f64`. A NaN or infinity anywhere in a stage or state is a
//! hard error carrying the offending step index, never a silent value.

use thiserror::Error;

/// Errors produced by grid construction and integration.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum OdeError {
    #[error("time grid requires finite t1 > t0 and n_steps >= 1 (got t0 = {t0}, t1 = {t1}, n_steps = {n_steps})")]
    InvalidTimeGrid { t0: f64, t1: f64, n_steps: usize },
    /// A stage evaluation or the combined update produced NaN or infinity.
    /// `step` is the index of the step being taken (the last good state is
    /// `states[step]`); a standalone `rk_step` reports step 0.
    #[error("non-finite state while taking step {step} from t = {t}")]
    NonFiniteState { step: usize, t: f64 },
}

/// Uniform time grid over `[t0, t1]` with `n_steps` steps, `n_steps + 1` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Requires finite `t1 > t0` and `n_steps >= 1`.
    pub fn new(t0: f64, t1: f64, n_steps: usize) -> Result<Self, OdeError> {
        if !(t0.is_finite() && t1.is_finite() && t1 > t0 && n_steps >= 1) {
            return Err(OdeError::InvalidTimeGrid { t0, t1, n_steps });
        }
        Ok(Self { t0, t1, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn h(&self) -> f64 {
        (self.t1 - self.t0) / self.n_steps as f64
    }

    /// Point `i` is always `t0 + i * h`, never a running sum.
    pub fn point(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n_steps).map(|i| self.point(i))
    }
}

/// The explicit methods the toolkit ships.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RkMethod {
    Euler,
    Rk4,
    Rk38,
}

impl RkMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RkMethod::Euler => "euler",
            RkMethod::Rk4 => "rk4",
            RkMethod::Rk38 => "rk38",
        }
    }
}

impl std::str::FromStr for RkMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(RkMethod::Euler),
            "rk4" => Ok(RkMethod::Rk4),
            "rk38" => Ok(RkMethod::Rk38),
            other => Err(format!("unknown method {other:?}, expected one of euler, rk4, rk38")),
        }
    }
}

impl std::fmt::Display for RkMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Coefficients of an explicit Runge-Kutta method.
///
/// `a` is strictly lower triangular, stored ragged: row `i` holds the `i`
/// weights applied to earlier stages. Weights satisfy `sum(b) = 1` and
/// `c[i] = sum(a[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
}

impl ButcherTableau {
    pub fn new(method: RkMethod) -> Self {
        let t = match method {
            RkMethod::Euler => Self {
                a: vec![vec![]],
                b: vec![1.0],
                c: vec![0.0],
                order: 1,
            },
            RkMethod::Rk4 => Self {
                a: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
                b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                c: vec![0.0, 0.5, 0.5, 1.0],
                order: 4,
            },
            RkMethod::Rk38 => Self {
                a: vec![
                    vec![],
                    vec![1.0 / 3.0],
                    vec![-1.0 / 3.0, 1.0],
                    vec![1.0, -1.0, 1.0],
                ],
                b: vec![1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0],
                c: vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0],
                order: 4,
            },
        };
        debug_assert!(t.is_consistent(1e-15));
        t
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Structural check: ragged strictly-lower `a`, `sum(b) = 1`,
    /// `c[i] = sum(a[i])`, all within `tol`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        let s = self.stages();
        if self.a.len() != s || self.c.len() != s {
            return false;
        }
        if self.a.iter().enumerate().any(|(i, row)| row.len() != i) {
            return false;
        }
        let b_sum: f64 = self.b.iter().sum();
        if (b_sum - 1.0).abs() > tol {
            return false;
        }
        self.c
            .iter()
            .zip(&self.a)
            .all(|(ci, row)| (ci - row.iter().sum::<f64>()).abs() <= tol)
    }
}

/// An initial value problem `dy/dt = rhs(t, y, params)`, `y(t0) = y0`.
///
/// The right-hand side writes the derivative into its output slice, which
/// always has the same length as `y0`.
pub struct IvpProblem<F> {
    pub rhs: F,
    pub y0: Vec<f64>,
    pub params: Vec<f64>,
    pub grid: TimeGrid,
}

/// Dense solver output: one state per grid point, `states[0]` is `y0` verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid.point(i)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }
}

struct NonFinite;

/// One explicit RK step shared by `rk_step` and `integrate`. Buffers must all
/// have the state dimension; `ks` holds one slot per stage.
fn step_into<F>(
    tableau: &ButcherTableau,
    f: &F,
    t: f64,
    y: &[f64],
    h: f64,
    params: &[f64],
    ks: &mut [Vec<f64>],
    stage: &mut [f64],
    out: &mut [f64],
) -> Result<(), NonFinite>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    for i in 0..tableau.stages() {
        stage.copy_from_slice(y);
        for (j, kj) in ks[..i].iter().enumerate() {
            let hw = h * tableau.a[i][j];
            if hw != 0.0 {
                for (sc, &kc) in stage.iter_mut().zip(kj) {
                    *sc = hw.mul_add(kc, *sc);
                }
            }
        }
        f(t + tableau.c[i] * h, stage, params, &mut ks[i]);
        if !ks[i].iter().all(|v| v.is_finite()) {
            return Err(NonFinite);
        }
    }
    out.copy_from_slice(y);
    for (i, ki) in ks.iter().enumerate() {
        let hw = h * tableau.b[i];
        if hw != 0.0 {
            for (oc, &kc) in out.iter_mut().zip(ki) {
                *oc = hw.mul_add(kc, *oc);
            }
        }
    }
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NonFinite)
    }
}

/// Advances `y` by one step of size `h`, evaluating the right-hand side
/// exactly once per stage.
pub fn rk_step<F>(
    tableau: &ButcherTableau,
    f: &F,
    t: f64,
    y: &[f64],
    h: f64,
    params: &[f64],
) -> Result<Vec<f64>, OdeError>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    assert!(h.is_finite() && h > 0.0, "step size must be finite and positive");
    let dim = y.len();
    let mut ks = vec![vec![0.0; dim]; tableau.stages()];
    let mut stage = vec![0.0; dim];
    let mut out = vec![0.0; dim];
    step_into(tableau, f, t, y, h, params, &mut ks, &mut stage, &mut out)
        .map_err(|_| OdeError::NonFiniteState { step: 0, t })?;
    Ok(out)
}

/// Integrates over the grid but stores only every `stride`-th state, plus
/// the final one; each kept state is paired with its step index. The step
/// arithmetic is the same as [`integrate`]'s, so kept states are
/// bit-identical to a dense solve. This is the memory-friendly form for
/// fine reference grids and large systems.
pub fn integrate_keep<F>(
    tableau: &ButcherTableau,
    problem: &IvpProblem<F>,
    stride: usize,
) -> Result<Vec<(usize, Vec<f64>)>, OdeError>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    assert!(stride >= 1, "keep stride must be positive");
    let grid = problem.grid;
    let dim = problem.y0.len();
    if !problem.y0.iter().all(|v| v.is_finite()) {
        return Err(OdeError::NonFiniteState { step: 0, t: grid.t0() });
    }

    let h = grid.h();
    let last = grid.n_steps();
    let mut kept = Vec::with_capacity(last / stride + 2);
    kept.push((0, problem.y0.clone()));

    let mut ks = vec![vec![0.0; dim]; tableau.stages()];
    let mut stage = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    let mut y = problem.y0.clone();

    for i in 0..last {
        let t = grid.point(i);
        step_into(
            tableau,
            &problem.rhs,
            t,
            &y,
            h,
            &problem.params,
            &mut ks,
            &mut stage,
            &mut next,
        )
        .map_err(|_| OdeError::NonFiniteState { step: i, t })?;
        if (i + 1) % stride == 0 || i + 1 == last {
            kept.push((i + 1, next.clone()));
        }
        std::mem::swap(&mut y, &mut next);
    }

    Ok(kept)
}

/// Integrates over the whole grid, storing every state. Fails fast on the
/// first non-finite value. Identical inputs give bit-identical trajectories.
pub fn integrate<F>(tableau: &ButcherTableau, problem: &IvpProblem<F>) -> Result<Trajectory, OdeError>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    let states = integrate_keep(tableau, problem, 1)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    Ok(Trajectory {
        grid: problem.grid,
        states,
    })
}

/// Mean absolute per-point deviation between trajectories on a shared grid,
/// pooled over components.
pub fn mean_abs_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    deviation(a, b, |d| d.abs())
}

/// Mean squared per-point deviation, pooled over components.
pub fn mean_sq_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    deviation(a, b, |d| d * d)
}

fn deviation(a: &Trajectory, b: &Trajectory, f: impl Fn(f64) -> f64) -> f64 {
    assert_eq!(a.states.len(), b.states.len(), "trajectories differ in length");
    assert_eq!(a.dim(), b.dim(), "trajectories differ in dimension");
    let mut acc = 0.0;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for (&xa, &xb) in sa.iter().zip(sb) {
            acc += f(xa - xb);
        }
    }
    acc / (a.states.len() * a.dim()) as f64
}
