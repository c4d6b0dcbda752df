//! Anderson acceleration against plain fixed-point iteration: same
//! tolerance, same starting point, strictly fewer iterations on the cos map
//! and never more on a batch of random affine contractions.

use odekit::optimize::{anderson_accelerate, fixed_point_iterate, AndersonConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOTTIE: f64 = 0.739_085_133_215_160_6;

#[test]
fn anderson_reaches_the_cos_fixed_point_faster_than_plain_iteration() {
    let g = |x: &[f64]| vec![x[0].cos()];
    let tol = 1e-10;
    let cfg = AndersonConfig {
        tol,
        ..AndersonConfig::default()
    };

    let accelerated = anderson_accelerate(g, &[1.0], &cfg).unwrap();
    let plain = fixed_point_iterate(g, &[1.0], tol, 10_000).unwrap();

    assert!(
        (accelerated.x[0] - DOTTIE).abs() <= 1e-10,
        "anderson landed at {}",
        accelerated.x[0]
    );
    assert!((plain.x[0] - DOTTIE).abs() <= 1e-9);
    assert!(
        accelerated.iterations < plain.iterations,
        "anderson took {} iterations, plain took {}",
        accelerated.iterations,
        plain.iterations
    );
}

/// Random 5-dimensional affine contractions `G(x) = Ax + c` with spectral
/// bound enforced by row-sum scaling. Anderson should never need more
/// iterations than plain iteration at the same tolerance.
#[test]
fn anderson_never_loses_to_plain_iteration_on_affine_contractions() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dim = 5;
    let tol = 1e-10;
    let mut anderson_wins = 0;

    for case in 0..20 {
        // Row-sum norm <= 0.9 makes G a contraction in the max norm.
        let mut a = vec![vec![0.0f64; dim]; dim];
        for row in a.iter_mut() {
            for entry in row.iter_mut() {
                *entry = rng.random_range(-1.0..1.0);
            }
            let sum: f64 = row.iter().map(|v| v.abs()).sum();
            for entry in row.iter_mut() {
                *entry *= 0.9 / sum.max(1e-12);
            }
        }
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = |x: &[f64]| -> Vec<f64> {
            (0..dim)
                .map(|i| (0..dim).map(|j| a[i][j] * x[j]).sum::<f64>() + c[i])
                .collect()
        };

        let x0 = vec![0.0; dim];
        let cfg = AndersonConfig {
            tol,
            max_iters: 10_000,
            ..AndersonConfig::default()
        };
        let accelerated = anderson_accelerate(g, &x0, &cfg).unwrap();
        let plain = fixed_point_iterate(g, &x0, tol, 10_000).unwrap();

        // Both must agree on the fixed point itself.
        for (ax, px) in accelerated.x.iter().zip(&plain.x) {
            assert!(
                (ax - px).abs() <= 1e-8,
                "case {case}: fixed points diverge ({ax} vs {px})"
            );
        }
        assert!(
            accelerated.iterations <= plain.iterations,
            "case {case}: anderson took {} iterations, plain took {}",
            accelerated.iterations,
            plain.iterations
        );
        if accelerated.iterations < plain.iterations {
            anderson_wins += 1;
        }
    }
    assert!(
        anderson_wins >= 15,
        "anderson strictly won only {anderson_wins} of 20 cases"
    );
}
