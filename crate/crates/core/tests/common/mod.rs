#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sasaa::pgeom::{dual_exponent, norm, PBall};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform radius, Gaussian direction; lands strictly inside the ball.
pub fn inside(rng: &mut ChaCha8Rng, ball: &PBall) -> Vec<f64> {
    let dir = gaussian(rng, ball.dim, 1.0);
    let n = norm(&dir, ball.p).unwrap();
    let r = ball.radius * rng.random_range(0.0..0.999);
    dir.iter().map(|v| v * r / n).collect()
}

/// Frank-Wolfe duality gap `max_{s in ball} <g, y - s>` of a convex objective
/// with gradient `g` at `y`. It bounds `f(y) - min_ball f` from above.
pub fn fw_gap(g: &[f64], y: &[f64], ball: &PBall) -> f64 {
    let q = dual_exponent(ball.p).unwrap();
    let inner: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
    inner + ball.radius * norm(g, q).unwrap()
}

/// Central finite-difference gradient.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
