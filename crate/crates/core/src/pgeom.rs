//! Geometry of l_p balls: norms, Euclidean projections, prox functions and
//! Bregman mirror steps.
//!
//! The prox function for `p in [1, 2]` is
//! `psi(u) = scale * ||u||_a^2 / (2 (a - 1))` with
//! `a = max(p, 1 + 1/ln(max(d, 3)))` and `scale = d^(2 (1/p - 1/a))`.
//! It is 1-strongly convex with respect to `||.||_p` and
//! `psi(u) <= kappa_p(d) e^2 ||u||_p^2`. `V(x, z) = psi(x - z)`.

use crate::error::{Error, Result};

/// Relative feasibility tolerance for ball membership.
pub const FEAS_TOL: f64 = 1e-9;
/// Relative tolerance of the scalar bisections on dual variables.
pub const DUAL_TOL: f64 = 1e-12;
/// Iteration cap for scalar bisections.
pub const MAX_BISECT: usize = 200;

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[inline]
pub(crate) fn sgnpow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `||x||_p` without validating `p`.
pub(crate) fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    } else if p == 1.0 {
        x.iter().map(|v| v.abs()).sum()
    } else if p == 2.0 {
        norm2(x)
    } else {
        let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        let s: f64 = x.iter().map(|v| (v.abs() / m).powf(p)).sum();
        m * s.powf(1.0 / p)
    }
}

/// `(sum |x_i|^p)^(1/p)`, or `max |x_i|` for `p = inf`.
pub fn norm(x: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm(x, p))
}

/// Hoelder conjugate `q` with `1/p + 1/q = 1`.
pub fn dual_exponent(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    })
}

/// Geometry factor: 1 for `p >= 2`, `min(1/(p-1), 2 ln(max(d, 2)))` on `[1, 2)`.
pub fn kappa_p(p: f64, d: usize) -> Result<f64> {
    check_exponent(p)?;
    if p >= 2.0 {
        return Ok(1.0);
    }
    let log_term = 2.0 * (d.max(2) as f64).ln();
    let inv = if p == 1.0 {
        f64::INFINITY
    } else {
        1.0 / (p - 1.0)
    };
    Ok(inv.min(log_term))
}

/// The ball `B_p^d(R)` centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PBall {
    pub p: f64,
    pub radius: f64,
    pub dim: usize,
}

impl PBall {
    pub fn new(p: f64, radius: f64, dim: usize) -> Result<Self> {
        check_exponent(p)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(crate::error::invalid("radius", format!("{radius} is not a positive finite number")));
        }
        if dim == 0 {
            return Err(crate::error::invalid("dim", "dimension must be at least 1"));
        }
        Ok(Self { p, radius, dim })
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        lp_norm(x, self.p)
    }

    /// Membership with relative tolerance [`FEAS_TOL`].
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.norm(x) <= self.radius * (1.0 + FEAS_TOL)
    }

    pub fn dual_exponent(&self) -> f64 {
        dual_exponent(self.p).expect("validated at construction")
    }
}

/// Root of an increasing function on `[lo, hi]` (`f(lo) <= 0 <= f(hi)`) by
/// Newton steps safeguarded with bisection. `f` returns value and derivative.
fn solve_increasing<F: Fn(f64) -> (f64, f64)>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut t = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECT {
        let (v, dv) = f(t);
        if v == 0.0 {
            return t;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
        let newton = t - v / dv;
        t = if dv.is_finite() && dv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    t
}

/// Euclidean projection onto the ball: `argmin_{||y||_p <= R} ||y - x||_2`.
pub fn project(x: &[f64], ball: &PBall) -> Result<Vec<f64>> {
    check_dims(ball.dim, x.len())?;
    let n = ball.norm(x);
    let r = ball.radius;
    if n <= r {
        return Ok(x.to_vec());
    }
    let p = ball.p;
    let y = if p == 2.0 {
        let s = r / n;
        x.iter().map(|v| v * s).collect()
    } else if p.is_infinite() {
        x.iter().map(|v| v.clamp(-r, r)).collect()
    } else if p == 1.0 {
        project_l1(x, r)
    } else {
        project_lp(x, p, r)?
    };
    Ok(shrink_into(y, ball))
}

/// Radially pulls `y` back inside the ball when rounding left it marginally outside.
fn shrink_into(mut y: Vec<f64>, ball: &PBall) -> Vec<f64> {
    let n = ball.norm(&y);
    if n > ball.radius {
        let s = ball.radius / n;
        y.iter_mut().for_each(|v| *v *= s);
    }
    y
}

/// Sorted-threshold projection onto the l_1 ball.
fn project_l1(x: &[f64], r: f64) -> Vec<f64> {
    let mut u: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - r) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    x.iter()
        .map(|v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// General `p`: per-coordinate KKT equation `t + lambda t^(p-1) = |x_i|`
/// under an outer bisection on the multiplier `lambda`.
fn project_lp(x: &[f64], p: f64, r: f64) -> Result<Vec<f64>> {
    let target = r.powf(p);
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let coord = |lambda: f64, a: f64| -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        solve_increasing(
            |t| {
                let tp = t.max(0.0);
                (
                    tp + lambda * tp.powf(p - 1.0) - a,
                    1.0 + lambda * (p - 1.0) * tp.powf(p - 2.0),
                )
            },
            0.0,
            a,
        )
    };
    let mass = |lambda: f64| -> f64 {
        x.iter()
            .map(|v| (coord(lambda, v.abs()) / scale).powf(p))
            .sum::<f64>()
            * scale.powf(p)
    };
    let mut lo = 0.0;
    let mut hi = scale.powf(2.0 - p).max(f64::MIN_POSITIVE);
    let mut grow = 0;
    while mass(hi) > target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > MAX_BISECT {
            return Err(Error::NoConvergence {
                what: "l_p projection multiplier bracket",
                iterations: MAX_BISECT,
            });
        }
    }
    let mut converged = false;
    for _ in 0..MAX_BISECT {
        if hi - lo <= DUAL_TOL * hi {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "l_p projection multiplier",
            iterations: MAX_BISECT,
        });
    }
    Ok(x.iter()
        .map(|v| v.signum() * coord(hi, v.abs()))
        .collect())
}

/// Distance-generating function for `p in [1, 2]`; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSetup {
    pub p: f64,
    pub dim: usize,
    /// Smoothing exponent `a in (1, 2]`.
    pub a: f64,
    /// Multiplier making the prox function 1-strongly convex in `||.||_p`.
    pub scale: f64,
}

impl ProxSetup {
    pub fn new(p: f64, dim: usize) -> Result<Self> {
        check_exponent(p)?;
        if p > 2.0 {
            return Err(Error::ProxExponent(p));
        }
        if dim == 0 {
            return Err(crate::error::invalid("dim", "dimension must be at least 1"));
        }
        let a = p.max(1.0 + 1.0 / (dim.max(3) as f64).ln());
        let scale = (dim as f64).powf(2.0 * (1.0 / p - 1.0 / a));
        Ok(Self { p, dim, a, scale })
    }

    /// `V(x, z) = ||x - z||_2^2 / 2`.
    pub fn euclidean(dim: usize) -> Self {
        Self {
            p: 2.0,
            dim,
            a: 2.0,
            scale: 1.0,
        }
    }

    /// Setup matched to a domain; the Euclidean setup is used for `p > 2`.
    pub fn for_ball(ball: &PBall) -> Self {
        if ball.p > 2.0 {
            Self::euclidean(ball.dim)
        } else {
            Self::new(ball.p, ball.dim).expect("ball exponent validated")
        }
    }

    pub fn is_euclidean(&self) -> bool {
        self.a == 2.0 && self.scale == 1.0
    }

    /// `psi(u) = (beta / 2) ||u||_a^2`.
    pub fn beta(&self) -> f64 {
        self.scale / (self.a - 1.0)
    }

    pub fn psi(&self, u: &[f64]) -> f64 {
        let n = lp_norm(u, self.a);
        0.5 * self.beta() * n * n
    }

    /// `V(x, z)`.
    pub fn prox_value(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        check_dims(self.dim, x.len())?;
        check_dims(self.dim, z.len())?;
        let u: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        Ok(self.psi(&u))
    }

    /// Upper constant `C` in `V(x, z) <= C ||x - z||_p^2`.
    pub fn upper_constant(&self) -> f64 {
        0.5 * self.beta()
    }

    /// `max psi(u)` over `||u||_p <= radius`.
    pub fn omega(&self, radius: f64) -> f64 {
        self.upper_constant() * radius * radius
    }

    pub fn psi_grad(&self, u: &[f64], out: &mut [f64]) {
        let n = lp_norm(u, self.a);
        if n == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let c = self.beta() * n;
        for (o, &ui) in out.iter_mut().zip(u) {
            *o = c * sgnpow(ui / n, self.a - 1.0);
        }
    }

    /// Gradient of the conjugate, the inverse map of [`Self::psi_grad`].
    pub fn psi_conj_grad(&self, v: &[f64], out: &mut [f64]) {
        let b = self.a / (self.a - 1.0);
        let n = lp_norm(v, b);
        if n == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let c = n / self.beta();
        for (o, &vi) in out.iter_mut().zip(v) {
            *o = c * sgnpow(vi / n, b - 1.0);
        }
    }

    /// `argmin_{x in ball} <w, x> + psi(x - center)`.
    pub fn prox_map(&self, center: &[f64], w: &[f64], ball: &PBall) -> Result<Vec<f64>> {
        check_dims(self.dim, center.len())?;
        check_dims(self.dim, w.len())?;
        check_dims(self.dim, ball.dim)?;
        if self.is_euclidean() {
            let y: Vec<f64> = center.iter().zip(w).map(|(c, wi)| c - wi).collect();
            return project(&y, ball);
        }
        if w.iter().all(|&v| v == 0.0) && ball.contains(center) {
            return Ok(center.to_vec());
        }
        let neg_w: Vec<f64> = w.iter().map(|v| -v).collect();
        let mut u = vec![0.0; self.dim];
        self.psi_conj_grad(&neg_w, &mut u);
        let x: Vec<f64> = center.iter().zip(&u).map(|(c, ui)| c + ui).collect();
        if ball.norm(&x) <= ball.radius {
            return Ok(x);
        }
        if ball.p.is_infinite() {
            return Err(Error::Config(
                "non-Euclidean prox steps on an l_inf ball are not supported".into(),
            ));
        }
        self.constrained_prox(center, w, ball)
    }

    /// One mirror step `argmin_{x in ball} <h g, x> + V(x, z)`.
    pub fn bregman_step(&self, z: &[f64], g: &[f64], h: f64, ball: &PBall) -> Result<Vec<f64>> {
        if self.is_euclidean() {
            check_dims(ball.dim, g.len())?;
            let y: Vec<f64> = z.iter().zip(g).map(|(zi, gi)| zi - h * gi).collect();
            return project(&y, ball);
        }
        if g.iter().all(|&v| v == 0.0) {
            return Ok(z.to_vec());
        }
        let w: Vec<f64> = g.iter().map(|v| h * v).collect();
        self.prox_map(z, &w, ball)
    }

    /// Mirror-descent step with the Bregman divergence of `psi(. - center)`:
    /// `argmin_{x in ball} <h g, x> + D(x, current)`. Euclidean setups reduce
    /// to `project(current - h g)` exactly.
    pub fn mirror_step(
        &self,
        center: &[f64],
        current: &[f64],
        g: &[f64],
        h: f64,
        ball: &PBall,
    ) -> Result<Vec<f64>> {
        check_dims(self.dim, current.len())?;
        check_dims(self.dim, g.len())?;
        if self.is_euclidean() {
            let y: Vec<f64> = current.iter().zip(g).map(|(x, gi)| x - h * gi).collect();
            return project(&y, ball);
        }
        let shift: Vec<f64> = current.iter().zip(center).map(|(x, c)| x - c).collect();
        let mut grad = vec![0.0; self.dim];
        self.psi_grad(&shift, &mut grad);
        let w: Vec<f64> = g.iter().zip(&grad).map(|(gi, di)| h * gi - di).collect();
        self.prox_map(center, &w, ball)
    }

    /// Constrained prox: bisection on the ball multiplier `lambda`; for fixed
    /// `lambda` the stationarity system is solved through its single coupling
    /// scalar `r = ||x - center||_a`.
    fn constrained_prox(&self, center: &[f64], w: &[f64], ball: &PBall) -> Result<Vec<f64>> {
        let wmax = w.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut lo = 0.0;
        let mut hi = wmax.max(1e-12);
        let mut x_hi = self.penalized(center, w, hi, ball.p)?;
        let mut grow = 0;
        while ball.norm(&x_hi) > ball.radius {
            lo = hi;
            hi *= 2.0;
            x_hi = self.penalized(center, w, hi, ball.p)?;
            grow += 1;
            if grow > MAX_BISECT {
                return Err(Error::NoConvergence {
                    what: "prox multiplier bracket",
                    iterations: MAX_BISECT,
                });
            }
        }
        let mut converged = false;
        for _ in 0..MAX_BISECT {
            if hi - lo <= DUAL_TOL * hi {
                converged = true;
                break;
            }
            let mid = 0.5 * (lo + hi);
            let x_mid = self.penalized(center, w, mid, ball.p)?;
            if ball.norm(&x_mid) > ball.radius {
                lo = mid;
            } else {
                hi = mid;
                x_hi = x_mid;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "prox multiplier",
                iterations: MAX_BISECT,
            });
        }
        Ok(shrink_into(x_hi, ball))
    }

    /// Minimizer of `<w, x> + psi(x - c) + (lambda / p) ||x||_p^p`.
    fn penalized(&self, center: &[f64], w: &[f64], lambda: f64, p: f64) -> Result<Vec<f64>> {
        let a = self.a;
        let beta = self.beta();
        let mut x = vec![0.0; self.dim];
        // residual(r) = ||x(r) - c||_a - r is strictly decreasing in r
        let eval = |r: f64, x: &mut [f64]| -> f64 {
            let k = beta * r.powf(2.0 - a);
            for i in 0..x.len() {
                x[i] = coordinate_root(k, lambda, w[i], center[i], a, p);
            }
            let u: Vec<f64> = x.iter().zip(center).map(|(xi, c)| xi - c).collect();
            lp_norm(&u, a) - r
        };
        let mut hi = 1.0_f64;
        let mut steps = 0;
        while eval(hi, &mut x) > 0.0 {
            hi *= 2.0;
            steps += 1;
            if steps > 2000 {
                return Err(Error::NoConvergence {
                    what: "prox radius bracket",
                    iterations: steps,
                });
            }
        }
        let mut lo = hi;
        steps = 0;
        loop {
            lo *= 0.5;
            if eval(lo, &mut x) >= 0.0 {
                break;
            }
            hi = lo;
            steps += 1;
            if lo < 1e-300 || steps > 2000 {
                x.copy_from_slice(center);
                // u = 0 is stationary
                return Ok(x);
            }
        }
        let mut converged = false;
        for _ in 0..MAX_BISECT {
            if hi - lo <= DUAL_TOL * hi {
                converged = true;
                break;
            }
            let mid = if hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if eval(mid, &mut x) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "prox radius",
                iterations: MAX_BISECT,
            });
        }
        eval(0.5 * (lo + hi), &mut x);
        Ok(x)
    }
}

/// Root of `k sgnpow(x - c, a - 1) + lambda dh(x) + w = 0`, where `dh` is the
/// (sub)derivative of `|x|^p / p`.
fn coordinate_root(k: f64, lambda: f64, w: f64, c: f64, a: f64, p: f64) -> f64 {
    let inv = 1.0 / (a - 1.0);
    if p == 1.0 {
        let at_zero = k * sgnpow(-c, a - 1.0) + w;
        if at_zero.abs() <= lambda {
            0.0
        } else if at_zero + lambda < 0.0 {
            c + sgnpow((-w - lambda) / k, inv)
        } else {
            c + sgnpow((-w + lambda) / k, inv)
        }
    } else {
        let g = |x: f64| k * sgnpow(x - c, a - 1.0) + lambda * sgnpow(x, p - 1.0) + w;
        let reach = (w.abs() / k)
            .powf(inv)
            .min((w.abs() / lambda).powf(1.0 / (p - 1.0)));
        let lo = c.min(0.0) - reach;
        let hi = c.max(0.0) + reach;
        if g(lo) >= 0.0 {
            return lo;
        }
        if g(hi) <= 0.0 {
            return hi;
        }
        solve_increasing(
            |x| {
                let d = k * (a - 1.0) * (x - c).abs().powf(a - 2.0)
                    + lambda * (p - 1.0) * x.abs().powf(p - 2.0);
                (g(x), d)
            },
            lo,
            hi,
        )
    }
}
