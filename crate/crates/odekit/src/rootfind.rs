//! Broyden's first and second methods for nonlinear systems `F(x) = 0`.
//!
//! Method I carries an approximate Jacobian `B_k` and solves
//! `B_k s_k = -F(x_k)` with a dense factorization rebuilt each iteration;
//! method II carries an approximate inverse Jacobian and multiplies,
//! `s_k = -B_k F(x_k)`. Both apply rank-one updates that enforce the
//! (inverse) secant condition exactly.
//!
//! The `*_with` variants invoke an observer after every accepted update
//! with `(B_{k+1}, s_k, y_k)`, which is how the test suites verify secant
//! conditions on the actual iterates rather than on a re-derivation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RootError {
    #[error("linear solve failed at iteration {iteration}: Jacobian approximation is singular")]
    SingularUpdate { iteration: usize },
    #[error("no convergence within budget; best residual {}", best.residual_norm)]
    NoConvergence { best: RootResult },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Shared settings. `b0` seeds the Jacobian approximation for method I and
/// the inverse-Jacobian approximation for method II; identity when absent.
#[derive(Debug, Clone)]
pub struct RootConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub b0: Option<DMatrix<f64>>,
}

impl RootConfig {
    pub fn new(tol: f64, max_iters: usize) -> Self {
        Self {
            tol,
            max_iters,
            b0: None,
        }
    }
}

fn initial_b(cfg: &RootConfig, n: usize) -> DMatrix<f64> {
    match &cfg.b0 {
        Some(b) => {
            assert_eq!((b.nrows(), b.ncols()), (n, n), "B0 must be n x n");
            b.clone()
        }
        None => DMatrix::identity(n, n),
    }
}

struct Tracker {
    best: Option<RootResult>,
}

impl Tracker {
    fn new() -> Self {
        Self { best: None }
    }

    fn observe(&mut self, x: &DVector<f64>, k: usize, r: f64) {
        if self.best.as_ref().is_none_or(|b| r < b.residual_norm) {
            self.best = Some(RootResult {
                x: x.iter().copied().collect(),
                iterations: k,
                residual_norm: r,
            });
        }
    }

    fn into_failure(self) -> RootError {
        RootError::NoConvergence {
            best: self.best.expect("at least one iterate was recorded"),
        }
    }
}

/// Broyden's first method: `B_{k+1} = B_k + (y_k - B_k s_k) s_kᵀ / (s_kᵀ s_k)`.
pub fn broyden1(
    f: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &RootConfig,
) -> Result<RootResult, RootError> {
    broyden1_with(f, x0, cfg, |_, _, _| {})
}

/// Broyden's first method with an update observer.
pub fn broyden1_with(
    mut f: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &RootConfig,
    mut on_update: impl FnMut(&DMatrix<f64>, &DVector<f64>, &DVector<f64>),
) -> Result<RootResult, RootError> {
    assert!(cfg.tol > 0.0, "tolerance must be positive");
    let n = x0.len();
    let mut b = initial_b(cfg, n);
    let mut x = DVector::from_column_slice(x0);
    let mut fx = DVector::from_vec(f(x.as_slice()));
    assert_eq!(fx.len(), n, "F must preserve dimension");
    let mut tracker = Tracker::new();

    for k in 0..=cfg.max_iters {
        let r = fx.norm();
        if r <= cfg.tol {
            return Ok(RootResult {
                x: x.iter().copied().collect(),
                iterations: k,
                residual_norm: r,
            });
        }
        tracker.observe(&x, k, r);
        if k == cfg.max_iters {
            break;
        }

        let s = b
            .clone()
            .lu()
            .solve(&(-&fx))
            .ok_or(RootError::SingularUpdate { iteration: k })?;
        let x_next = &x + &s;
        let fx_next = DVector::from_vec(f(x_next.as_slice()));
        let y = &fx_next - &fx;

        let sts = s.dot(&s);
        if sts.is_finite() && sts > 0.0 && y.iter().all(|v| v.is_finite()) {
            let residual_dir = &y - &b * &s;
            // Rank-one update; restores B s = y exactly.
            b += residual_dir * s.transpose() / sts;
            on_update(&b, &s, &y);
        }

        x = x_next;
        fx = fx_next;
    }
    Err(tracker.into_failure())
}

/// Broyden's second method, the inverse update
/// `B_{k+1} = B_k + (s_k - B_k y_k) s_kᵀ B_k / (s_kᵀ B_k y_k)`.
pub fn broyden2(
    f: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &RootConfig,
) -> Result<RootResult, RootError> {
    broyden2_with(f, x0, cfg, |_, _, _| {})
}

/// Broyden's second method with an update observer.
///
/// A degenerate denominator, `|s_kᵀ B_k y_k|` below `1e-14 · ‖s_k‖ ‖B_k y_k‖`,
/// skips the update and keeps the previous `B_k` alive rather than aborting.
pub fn broyden2_with(
    mut f: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &RootConfig,
    mut on_update: impl FnMut(&DMatrix<f64>, &DVector<f64>, &DVector<f64>),
) -> Result<RootResult, RootError> {
    assert!(cfg.tol > 0.0, "tolerance must be positive");
    let n = x0.len();
    let mut b = initial_b(cfg, n);
    let mut x = DVector::from_column_slice(x0);
    let mut fx = DVector::from_vec(f(x.as_slice()));
    assert_eq!(fx.len(), n, "F must preserve dimension");
    let mut tracker = Tracker::new();

    for k in 0..=cfg.max_iters {
        let r = fx.norm();
        if r <= cfg.tol {
            return Ok(RootResult {
                x: x.iter().copied().collect(),
                iterations: k,
                residual_norm: r,
            });
        }
        tracker.observe(&x, k, r);
        if k == cfg.max_iters {
            break;
        }

        let s = -(&b * &fx);
        let x_next = &x + &s;
        let fx_next = DVector::from_vec(f(x_next.as_slice()));
        let y = &fx_next - &fx;

        let by = &b * &y;
        let den = s.dot(&by);
        let scale = s.norm() * by.norm();
        if den.is_finite() && scale > 0.0 && den.abs() >= 1e-14 * scale {
            let u = b.transpose() * &s; // row s^T B, stored as a column
            let dir = &s - &by;
            b += dir * u.transpose() / den;
            on_update(&b, &s, &y);
        }

        x = x_next;
        fx = fx_next;
    }
    Err(tracker.into_failure())
}
