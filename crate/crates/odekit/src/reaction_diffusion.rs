//! Gray-Scott reaction-diffusion on a periodic 2-D grid, discretized by
//! method of lines into one flat ODE for the core solver.
//!
//! Fields live on an `nx` by `ny` lattice with unit spacing. The flat layout
//! is row-major U block then V block (dimension `2 * nx * ny`), and the
//! 5-point Laplacian wraps periodically, which preserves the discrete
//! conservation identities the tests lean on.

use thiserror::Error;

use crate::ode::{integrate_keep, ButcherTableau, IvpProblem, OdeError, TimeGrid};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RdError {
    #[error("grid {nx}x{ny} cannot hold the seeded square; need at least 71x71")]
    GridTooSmall { nx: usize, ny: usize },
}

/// Diffusion, feed, and kill rates of `dU = D_U ∇²U − UV² + F(1−U)`,
/// `dV = D_V ∇²V + UV² − (F + k)V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrayScottParams {
    pub d_u: f64,
    pub d_v: f64,
    pub feed: f64,
    pub kill: f64,
}

impl Default for GrayScottParams {
    /// The canonical pattern-forming rates: D_U = 0.16, D_V = 0.08,
    /// F = 0.04, k = 0.06.
    fn default() -> Self {
        Self {
            d_u: 0.16,
            d_v: 0.08,
            feed: 0.04,
            kill: 0.06,
        }
    }
}

/// Concentration fields on the lattice, stored row-major (`i` slow, `j` fast).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Grid2D {
    pub fn uniform(nx: usize, ny: usize, u: f64, v: f64) -> Self {
        Self {
            nx,
            ny,
            u: vec![u; nx * ny],
            v: vec![v; nx * ny],
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        i * self.ny + j
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    /// `[U | V]`, both row-major.
    pub fn flatten(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(2 * self.cells());
        z.extend_from_slice(&self.u);
        z.extend_from_slice(&self.v);
        z
    }

    pub fn from_flat(nx: usize, ny: usize, z: &[f64]) -> Self {
        assert_eq!(z.len(), 2 * nx * ny, "flat state has wrong dimension");
        Self {
            nx,
            ny,
            u: z[..nx * ny].to_vec(),
            v: z[nx * ny..].to_vec(),
        }
    }
}

/// 5-point periodic Laplacian with unit spacing. The two axis contributions
/// are grouped as `(l + r − 2c) + (u + d − 2c)` so constant fields come out
/// exactly zero.
pub fn laplacian5(nx: usize, ny: usize, field: &[f64]) -> Vec<f64> {
    assert!(nx >= 3 && ny >= 3, "stencil needs at least a 3x3 grid");
    assert_eq!(field.len(), nx * ny);
    let mut out = vec![0.0; nx * ny];
    laplacian5_into(nx, ny, field, &mut out);
    out
}

fn laplacian5_into(nx: usize, ny: usize, field: &[f64], out: &mut [f64]) {
    for i in 0..nx {
        let up = if i == 0 { nx - 1 } else { i - 1 };
        let down = if i == nx - 1 { 0 } else { i + 1 };
        for j in 0..ny {
            let left = if j == 0 { ny - 1 } else { j - 1 };
            let right = if j == ny - 1 { 0 } else { j + 1 };
            let c = field[i * ny + j];
            let horiz = field[i * ny + left] + field[i * ny + right] - 2.0 * c;
            let vert = field[up * ny + j] + field[down * ny + j] - 2.0 * c;
            out[i * ny + j] = horiz + vert;
        }
    }
}

/// Flat-state right-hand side shared by [`gray_scott_rhs`] and the
/// simulation loop. `z` and `dz` are `[U | V]` of length `2 * nx * ny`;
/// `lap_u`/`lap_v` are scratch buffers of `nx * ny` cells.
fn gray_scott_rhs_flat(
    p: &GrayScottParams,
    nx: usize,
    ny: usize,
    z: &[f64],
    dz: &mut [f64],
    lap_u: &mut [f64],
    lap_v: &mut [f64],
) {
    let n = nx * ny;
    let (u, v) = z.split_at(n);
    let (du, dv) = dz.split_at_mut(n);
    laplacian5_into(nx, ny, u, lap_u);
    laplacian5_into(nx, ny, v, lap_v);
    for c in 0..n {
        let uvv = u[c] * v[c] * v[c];
        du[c] = p.d_u * lap_u[c] - uvv + p.feed * (1.0 - u[c]);
        dv[c] = p.d_v * lap_v[c] + uvv - (p.feed + p.kill) * v[c];
    }
}

/// Pointwise time derivatives of both fields.
pub fn gray_scott_rhs(p: &GrayScottParams, g: &Grid2D) -> Grid2D {
    let n = g.cells();
    let z = g.flatten();
    let mut dz = vec![0.0; 2 * n];
    let mut lap_u = vec![0.0; n];
    let mut lap_v = vec![0.0; n];
    gray_scott_rhs_flat(p, g.nx, g.ny, &z, &mut dz, &mut lap_u, &mut lap_v);
    Grid2D::from_flat(g.nx, g.ny, &dz)
}

/// What the field outside the seeded square is set to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Background {
    /// `(U, V) = (0, 0)`, the minimal baseline.
    Zero,
    /// `(U, V) = (1, 0)`, the homogeneous steady state common in the
    /// wider Gray-Scott literature.
    Saturated,
}

/// Seeds `(U, V) = (0.5, 0.25)` on the inclusive square `30 <= i, j <= 70`
/// over the chosen background.
pub fn init_gray_scott_on(nx: usize, ny: usize, background: Background) -> Result<Grid2D, RdError> {
    if nx < 71 || ny < 71 {
        return Err(RdError::GridTooSmall { nx, ny });
    }
    let (bg_u, bg_v) = match background {
        Background::Zero => (0.0, 0.0),
        Background::Saturated => (1.0, 0.0),
    };
    let mut g = Grid2D::uniform(nx, ny, bg_u, bg_v);
    for i in 30..=70 {
        for j in 30..=70 {
            let c = g.idx(i, j);
            g.u[c] = 0.5;
            g.v[c] = 0.25;
        }
    }
    Ok(g)
}

/// The canonical seeded grid on a zero background.
pub fn init_gray_scott(nx: usize, ny: usize) -> Result<Grid2D, RdError> {
    init_gray_scott_on(nx, ny, Background::Zero)
}

/// Integrates the flattened system and unflattens snapshots every `stride`
/// steps (step 0 included; the final step is always appended even when it
/// falls off-stride).
pub fn simulate_gray_scott(
    p: &GrayScottParams,
    g0: &Grid2D,
    grid: TimeGrid,
    tableau: &ButcherTableau,
    stride: usize,
) -> Result<Vec<Grid2D>, OdeError> {
    assert!(stride >= 1, "snapshot stride must be positive");
    let (nx, ny) = (g0.nx, g0.ny);
    let n = nx * ny;
    let scratch = std::cell::RefCell::new((vec![0.0; n], vec![0.0; n]));
    let problem = IvpProblem {
        rhs: |_t: f64, z: &[f64], _p: &[f64], dz: &mut [f64]| {
            let (ref mut lap_u, ref mut lap_v) = *scratch.borrow_mut();
            gray_scott_rhs_flat(p, nx, ny, z, dz, lap_u, lap_v);
        },
        y0: g0.flatten(),
        params: vec![],
        grid,
    };
    let kept = integrate_keep(tableau, &problem, stride)?;
    Ok(kept
        .into_iter()
        .map(|(_, z)| Grid2D::from_flat(nx, ny, &z))
        .collect())
}

/// Population variance of a field, the scalar used to quantify pattern
/// growth.
pub fn spatial_variance(field: &[f64]) -> f64 {
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    field.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::RkMethod;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn laplacian_of_constants_is_exactly_zero() {
        for c in [0.0, 0.1, 1.0, -3.7] {
            let lap = laplacian5(6, 5, &vec![c; 30]);
            assert!(lap.iter().all(|&x| x == 0.0), "nonzero laplacian for {c}");
        }
    }

    #[test]
    fn laplacian_of_an_impulse_is_the_stencil() {
        let (nx, ny) = (16, 16);
        let mut field = vec![0.0; nx * ny];
        field[5 * ny + 7] = 1.0;
        let lap = laplacian5(nx, ny, &field);
        for i in 0..nx {
            for j in 0..ny {
                let expected = match (i, j) {
                    (5, 7) => -4.0,
                    (4, 7) | (6, 7) | (5, 6) | (5, 8) => 1.0,
                    _ => 0.0,
                };
                assert_eq!(lap[i * ny + j], expected, "cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn laplacian_of_a_row_quadratic_is_two_off_the_wrap() {
        let (nx, ny) = (12, 7);
        let field: Vec<f64> = (0..nx)
            .flat_map(|i| std::iter::repeat((i * i) as f64).take(ny))
            .collect();
        let lap = laplacian5(nx, ny, &field);
        for i in 1..nx - 1 {
            for j in 0..ny {
                assert_eq!(lap[i * ny + j], 2.0, "cell ({i}, {j})");
            }
        }
    }

    #[test]
    fn laplacian_sums_to_zero_on_the_periodic_grid() {
        // Deterministic scramble standing in for an arbitrary field.
        let field: Vec<f64> = (0..15 * 11)
            .map(|c| ((c * 2654435761usize) % 1000) as f64 / 300.0 - 1.5)
            .collect();
        let lap = laplacian5(15, 11, &field);
        assert_abs_diff_eq!(lap.iter().sum::<f64>(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn flatten_round_trips_exactly() {
        let mut g = Grid2D::uniform(9, 4, 0.0, 0.0);
        for c in 0..g.cells() {
            g.u[c] = (c as f64).sin();
            g.v[c] = (c as f64).cos();
        }
        let flat = g.flatten();
        assert_eq!(flat.len(), 72);
        assert_eq!(Grid2D::from_flat(9, 4, &flat), g);
    }

    #[test]
    fn homogeneous_saturated_state_is_stationary() {
        let p = GrayScottParams::default();
        let d = gray_scott_rhs(&p, &Grid2D::uniform(8, 8, 1.0, 0.0));
        assert!(d.u.iter().all(|&x| x == 0.0));
        assert!(d.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empty_state_is_fed_at_the_feed_rate() {
        let p = GrayScottParams::default();
        let d = gray_scott_rhs(&p, &Grid2D::uniform(8, 8, 0.0, 0.0));
        assert!(d.u.iter().all(|&x| x == 0.04));
        assert!(d.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reaction_terms_at_the_seed_concentration() {
        // Uniform grid kills the diffusion term, leaving pure reaction.
        let p = GrayScottParams::default();
        let d = gray_scott_rhs(&p, &Grid2D::uniform(5, 5, 0.5, 0.25));
        assert_relative_eq!(d.u[0], -0.01125, epsilon = 1e-15);
        assert_relative_eq!(d.v[0], 0.00625, epsilon = 1e-15);
    }

    #[test]
    fn rhs_is_translation_equivariant() {
        let (nx, ny) = (10, 9);
        let mut g = Grid2D::uniform(nx, ny, 0.0, 0.0);
        for c in 0..g.cells() {
            g.u[c] = 0.5 + 0.3 * ((c as f64) * 0.7).sin();
            g.v[c] = 0.25 + 0.2 * ((c as f64) * 1.3).cos();
        }
        let (di, dj) = (3, 5);
        let mut shifted = Grid2D::uniform(nx, ny, 0.0, 0.0);
        for i in 0..nx {
            for j in 0..ny {
                let src = g.idx(i, j);
                let dst = shifted.idx((i + di) % nx, (j + dj) % ny);
                shifted.u[dst] = g.u[src];
                shifted.v[dst] = g.v[src];
            }
        }
        let p = GrayScottParams::default();
        let d = gray_scott_rhs(&p, &g);
        let d_shifted = gray_scott_rhs(&p, &shifted);
        for i in 0..nx {
            for j in 0..ny {
                let src = g.idx(i, j);
                let dst = g.idx((i + di) % nx, (j + dj) % ny);
                assert_eq!(d.u[src], d_shifted.u[dst]);
                assert_eq!(d.v[src], d_shifted.v[dst]);
            }
        }
    }

    #[test]
    fn seeding_fills_the_inclusive_square() {
        let g = init_gray_scott(100, 100).unwrap();
        assert_eq!((g.u[g.idx(50, 50)], g.v[g.idx(50, 50)]), (0.5, 0.25));
        assert_eq!((g.u[g.idx(0, 0)], g.v[g.idx(0, 0)]), (0.0, 0.0));
        let seeded = g.u.iter().filter(|&&u| u == 0.5).count();
        assert_eq!(seeded, 41 * 41);

        let g = init_gray_scott_on(100, 100, Background::Saturated).unwrap();
        assert_eq!((g.u[g.idx(0, 0)], g.v[g.idx(0, 0)]), (1.0, 0.0));
        assert_eq!((g.u[g.idx(50, 50)], g.v[g.idx(50, 50)]), (0.5, 0.25));
    }

    #[test]
    fn undersized_grids_are_rejected() {
        assert_eq!(
            init_gray_scott(70, 100).unwrap_err(),
            RdError::GridTooSmall { nx: 70, ny: 100 }
        );
        assert!(init_gray_scott(100, 64).is_err());
    }

    #[test]
    fn frozen_dynamics_keep_every_snapshot_at_the_initial_grid() {
        let p = GrayScottParams {
            d_u: 0.0,
            d_v: 0.0,
            feed: 0.0,
            kill: 0.0,
        };
        let mut g0 = Grid2D::uniform(8, 8, 0.0, 0.0);
        for c in 0..g0.cells() {
            g0.u[c] = (c % 5) as f64 * 0.2;
        }
        let grid = TimeGrid::new(0.0, 10.0, 10).unwrap();
        let frames =
            simulate_gray_scott(&p, &g0, grid, &ButcherTableau::new(RkMethod::Rk4), 2).unwrap();
        assert_eq!(frames.len(), 6);
        assert!(frames.iter().all(|f| *f == g0));
    }

    #[test]
    fn uniform_grids_stay_uniform() {
        let p = GrayScottParams::default();
        let g0 = Grid2D::uniform(8, 8, 0.3, 0.2);
        let grid = TimeGrid::new(0.0, 50.0, 50).unwrap();
        let frames =
            simulate_gray_scott(&p, &g0, grid, &ButcherTableau::new(RkMethod::Rk4), 10).unwrap();
        for f in &frames {
            let spread_u = f.u.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - f.u.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let spread_v = f.v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - f.v.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            assert!(spread_u <= 1e-12 && spread_v <= 1e-12);
        }
    }

    #[test]
    fn snapshot_stride_includes_both_endpoints() {
        let p = GrayScottParams::default();
        let g0 = Grid2D::uniform(8, 8, 1.0, 0.0);
        let grid = TimeGrid::new(0.0, 900.0, 900).unwrap();
        let frames =
            simulate_gray_scott(&p, &g0, grid, &ButcherTableau::new(RkMethod::Rk4), 100).unwrap();
        assert_eq!(frames.len(), 10);

        // Off-stride final step is still captured.
        let grid = TimeGrid::new(0.0, 90.0, 90).unwrap();
        let frames =
            simulate_gray_scott(&p, &g0, grid, &ButcherTableau::new(RkMethod::Rk4), 40).unwrap();
        assert_eq!(frames.len(), 4); // steps 0, 40, 80, 90
    }

    #[test]
    fn variance_of_a_two_level_field() {
        let field = vec![1.0, 1.0, 0.0, 0.0];
        assert_relative_eq!(spatial_variance(&field), 0.25, epsilon = 1e-15);
        assert_eq!(spatial_variance(&[3.0; 9]), 0.0);
    }
}
