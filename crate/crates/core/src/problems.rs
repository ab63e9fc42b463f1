//! Stochastic test problems with analytic objectives, optima and regime
//! constants, so that the success event `F(x) - F* <= eps` can be checked
//! exactly.
//!
//! Every problem exposes two oracle paths: the per-sample oracle (`loss`,
//! `subgrad`) used by online methods, and a sufficient statistic of a frozen
//! sample (`summarize`, `stat_loss`, `stat_subgrad`) that reproduces the
//! empirical mean of the per-sample oracle and is used by offline solvers.

use std::fmt::Debug;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pgeom::{dot, lp_norm, norm2, project, PBall, ProxSetup};
use crate::summation::{pairwise_mean, pairwise_mean_vec};

/// Growth condition `F(x) - F* >= mu_gamma * dist(x, X*)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub gamma: f64,
    pub mu_gamma: f64,
}

/// Regime constants of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMeta {
    /// Lipschitz constant `M` in the dual norm; root-mean-square over the
    /// noise when the per-sample constant depends on the sample.
    pub lipschitz: f64,
    /// Strong convexity modulus of every `f(., xi)` in the domain norm, or 0.
    pub mu: f64,
    pub growth: Option<Growth>,
    /// Subgaussian variance parameter of the centered loss increments.
    pub lambda: Option<f64>,
    pub domain: PBall,
}

/// Oracle contract of a stochastic problem `min_{x in X} E f(x, xi)`.
pub trait StochasticProblem: Sync {
    type Xi: Clone + Debug + Send + Sync + Serialize + DeserializeOwned;
    type Stat: Clone + Debug + Send + Sync;

    fn meta(&self) -> &OracleMeta;

    fn dim(&self) -> usize {
        self.meta().domain.dim
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Xi;

    fn loss(&self, x: &[f64], xi: &Self::Xi) -> f64;

    fn subgrad(&self, x: &[f64], xi: &Self::Xi, out: &mut [f64]);

    /// Per-sample Lipschitz constant `M(xi)` on the domain, dual norm.
    fn lipschitz_at(&self, xi: &Self::Xi) -> f64;

    /// `F(x) = E f(x, xi)`.
    fn true_value(&self, x: &[f64]) -> f64;

    /// `(x*, F*)` when known in closed form.
    fn true_opt(&self) -> Option<(Vec<f64>, f64)>;

    /// Solution closest to `x0` in prox distance.
    fn nearest_solution(&self, _x0: &[f64], _prox: &ProxSetup) -> Option<Vec<f64>> {
        self.true_opt().map(|(x, _)| x)
    }

    /// Optimum of `F + mu V(., center)` when known in closed form.
    fn regularized_opt(
        &self,
        _mu: f64,
        _center: &[f64],
        _prox: &ProxSetup,
    ) -> Option<(Vec<f64>, f64)> {
        None
    }

    fn summarize(&self, sample: &[Self::Xi]) -> Self::Stat;

    /// Empirical mean loss evaluated from the sufficient statistic.
    fn stat_loss(&self, stat: &Self::Stat, x: &[f64]) -> f64;

    fn stat_subgrad(&self, stat: &Self::Stat, x: &[f64], out: &mut [f64]);

    /// Exact minimizer and minimum of the empirical objective, if available.
    fn stat_minimum(&self, _stat: &Self::Stat) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// Oracle contract of `min_x max_y E f(x, y, xi)`.
pub trait SaddleProblem: Sync {
    type Xi: Clone + Debug + Send + Sync + Serialize + DeserializeOwned;
    type Stat: Clone + Debug + Send + Sync;

    fn meta_x(&self) -> &OracleMeta;
    fn meta_y(&self) -> &OracleMeta;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Xi;
    fn loss(&self, x: &[f64], y: &[f64], xi: &Self::Xi) -> f64;
    fn subgrad_x(&self, x: &[f64], y: &[f64], xi: &Self::Xi, out: &mut [f64]);
    fn supergrad_y(&self, x: &[f64], y: &[f64], xi: &Self::Xi, out: &mut [f64]);
    fn true_value(&self, x: &[f64], y: &[f64]) -> f64;
    /// `argmin_x F(x, y)`.
    fn best_response_x(&self, y: &[f64]) -> Vec<f64>;
    /// `argmax_y F(x, y)`.
    fn best_response_y(&self, x: &[f64]) -> Vec<f64>;

    /// `max_y F(x, y) - min_x F(x, y)` at `(x, y)`.
    fn duality_gap(&self, x: &[f64], y: &[f64]) -> f64 {
        let y_star = self.best_response_y(x);
        let x_star = self.best_response_x(y);
        self.true_value(x, &y_star) - self.true_value(&x_star, y)
    }

    fn summarize(&self, sample: &[Self::Xi]) -> Self::Stat;
    fn stat_loss(&self, stat: &Self::Stat, x: &[f64], y: &[f64]) -> f64;
    fn stat_subgrad_x(&self, stat: &Self::Stat, x: &[f64], y: &[f64], out: &mut [f64]);
    fn stat_supergrad_y(&self, stat: &Self::Stat, x: &[f64], y: &[f64], out: &mut [f64]);
    fn stat_best_response_x(&self, stat: &Self::Stat, y: &[f64]) -> Vec<f64>;
    fn stat_best_response_y(&self, stat: &Self::Stat, x: &[f64]) -> Vec<f64>;
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive and finite")))
    }
}

/// A standard Gaussian noise vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussXi(pub Vec<f64>);

/// Sample mean of Gaussian noise vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanStat {
    pub mean: Vec<f64>,
    pub mean_sq_norm: f64,
    pub n: usize,
}

fn mean_stat(sample: &[GaussXi], d: usize) -> MeanStat {
    MeanStat {
        mean: pairwise_mean_vec(sample.len(), d, &|k, out| out.copy_from_slice(&sample[k].0)),
        mean_sq_norm: pairwise_mean(sample.len(), &|k| dot(&sample[k].0, &sample[k].0)),
        n: sample.len(),
    }
}

/// `f(x, xi) = ||x||_2^gamma - gamma s <xi, x>` on `B_2^d(1)`, `xi ~ N(0, I_d)`.
#[derive(Debug, Clone)]
pub struct GaussPower {
    gamma: f64,
    noise: f64,
    meta: OracleMeta,
}

impl GaussPower {
    pub fn new(d: usize, gamma: f64, noise: f64) -> Result<Self> {
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("{gamma} must be >= 1")));
        }
        positive("noise", noise)?;
        let domain = PBall::new(2.0, 1.0, d)?;
        let r = domain.radius;
        // E ||g||^2 <= gamma^2 R^(2 (gamma - 1)) + gamma^2 s^2 d
        let lipschitz = gamma * (r.powf(2.0 * (gamma - 1.0)) + noise * noise * d as f64).sqrt();
        Ok(Self {
            gamma,
            noise,
            meta: OracleMeta {
                lipschitz,
                mu: if gamma == 2.0 { 2.0 } else { 0.0 },
                growth: Some(Growth {
                    gamma,
                    mu_gamma: 1.0,
                }),
                lambda: Some(gamma * noise),
                domain,
            },
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Deterministic part `gamma R^(gamma - 1)` of the per-sample Lipschitz constant.
    pub fn lipschitz_deterministic(&self) -> f64 {
        self.gamma * self.meta.domain.radius.powf(self.gamma - 1.0)
    }

    /// `E M(xi)^2` of the noise part, `gamma^2 s^2 d`.
    pub fn lipschitz_noise_second_moment(&self) -> f64 {
        self.gamma * self.gamma * self.noise * self.noise * self.dim() as f64
    }

    fn power_grad(&self, x: &[f64], out: &mut [f64]) {
        let n = norm2(x);
        if n == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let c = self.gamma * n.powf(self.gamma - 2.0);
            for (o, xi) in out.iter_mut().zip(x) {
                *o = c * xi;
            }
        }
    }
}

impl StochasticProblem for GaussPower {
    type Xi = GaussXi;
    type Stat = MeanStat;

    fn meta(&self) -> &OracleMeta {
        &self.meta
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussXi {
        GaussXi(gaussian_vec(rng, self.dim()))
    }

    fn loss(&self, x: &[f64], xi: &GaussXi) -> f64 {
        norm2(x).powf(self.gamma) - self.gamma * self.noise * dot(&xi.0, x)
    }

    fn subgrad(&self, x: &[f64], xi: &GaussXi, out: &mut [f64]) {
        self.power_grad(x, out);
        let c = self.gamma * self.noise;
        for (o, e) in out.iter_mut().zip(&xi.0) {
            *o -= c * e;
        }
    }

    fn lipschitz_at(&self, xi: &GaussXi) -> f64 {
        self.lipschitz_deterministic() + self.gamma * self.noise * norm2(&xi.0)
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        norm2(x).powf(self.gamma)
    }

    fn true_opt(&self) -> Option<(Vec<f64>, f64)> {
        Some((vec![0.0; self.dim()], 0.0))
    }

    fn summarize(&self, sample: &[GaussXi]) -> MeanStat {
        mean_stat(sample, self.dim())
    }

    fn stat_loss(&self, stat: &MeanStat, x: &[f64]) -> f64 {
        norm2(x).powf(self.gamma) - self.gamma * self.noise * dot(&stat.mean, x)
    }

    fn stat_subgrad(&self, stat: &MeanStat, x: &[f64], out: &mut [f64]) {
        self.power_grad(x, out);
        let c = self.gamma * self.noise;
        for (o, e) in out.iter_mut().zip(&stat.mean) {
            *o -= c * e;
        }
    }

    fn stat_minimum(&self, stat: &MeanStat) -> Option<(Vec<f64>, f64)> {
        // radial problem r^gamma - gamma v r on [0, R] along the mean direction
        let m = norm2(&stat.mean);
        let v = self.noise * m;
        let r_max = self.meta.domain.radius;
        let r = if m == 0.0 {
            0.0
        } else if self.gamma == 1.0 {
            if v > 1.0 {
                r_max
            } else {
                0.0
            }
        } else {
            v.powf(1.0 / (self.gamma - 1.0)).min(r_max)
        };
        let x: Vec<f64> = if m == 0.0 {
            vec![0.0; self.dim()]
        } else {
            stat.mean.iter().map(|e| r * e / m).collect()
        };
        let val = self.stat_loss(stat, &x);
        Some((x, val))
    }
}

/// `f(x, xi) = (mu / 2) ||x - c - s xi||_2^2` on `B_2^d(R)` with
/// `c = (R / 2) 1 / sqrt(d)`.
#[derive(Debug, Clone)]
pub struct StronglyConvexQuad {
    center: Vec<f64>,
    modulus: f64,
    noise: f64,
    meta: OracleMeta,
}

impl StronglyConvexQuad {
    pub fn new(d: usize, mu: f64, noise: f64) -> Result<Self> {
        Self::with_radius(d, mu, noise, 1.0)
    }

    pub fn with_radius(d: usize, mu: f64, noise: f64, radius: f64) -> Result<Self> {
        positive("mu", mu)?;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(invalid("noise", format!("{noise} must be nonnegative")));
        }
        let domain = PBall::new(2.0, radius, d)?;
        let c = 0.5 * radius / (d as f64).sqrt();
        let center = vec![c; d];
        let reach = radius + norm2(&center);
        let lipschitz = mu * (reach * reach + noise * noise * d as f64).sqrt();
        Ok(Self {
            center,
            modulus: mu,
            noise,
            meta: OracleMeta {
                lipschitz,
                mu,
                growth: Some(Growth {
                    gamma: 2.0,
                    mu_gamma: mu / 2.0,
                }),
                lambda: Some(mu * noise),
                domain,
            },
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn opt_value(&self) -> f64 {
        0.5 * self.modulus * self.noise * self.noise * self.dim() as f64
    }
}

impl StochasticProblem for StronglyConvexQuad {
    type Xi = GaussXi;
    type Stat = MeanStat;

    fn meta(&self) -> &OracleMeta {
        &self.meta
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussXi {
        GaussXi(gaussian_vec(rng, self.dim()))
    }

    fn loss(&self, x: &[f64], xi: &GaussXi) -> f64 {
        let s: f64 = x
            .iter()
            .zip(&self.center)
            .zip(&xi.0)
            .map(|((xi_, c), e)| {
                let r = xi_ - c - self.noise * e;
                r * r
            })
            .sum();
        0.5 * self.modulus * s
    }

    fn subgrad(&self, x: &[f64], xi: &GaussXi, out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = self.modulus * (x[i] - self.center[i] - self.noise * xi.0[i]);
        }
    }

    fn lipschitz_at(&self, xi: &GaussXi) -> f64 {
        self.modulus * (self.meta.domain.radius + norm2(&self.center) + self.noise * norm2(&xi.0))
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        0.5 * self.modulus * s + self.opt_value()
    }

    fn true_opt(&self) -> Option<(Vec<f64>, f64)> {
        Some((self.center.clone(), self.opt_value()))
    }

    fn summarize(&self, sample: &[GaussXi]) -> MeanStat {
        mean_stat(sample, self.dim())
    }

    fn stat_loss(&self, stat: &MeanStat, x: &[f64]) -> f64 {
        let mut sq = 0.0;
        let mut cross = 0.0;
        for i in 0..x.len() {
            let u = x[i] - self.center[i];
            sq += u * u;
            cross += stat.mean[i] * u;
        }
        let s = self.noise;
        0.5 * self.modulus * (sq - 2.0 * s * cross + s * s * stat.mean_sq_norm)
    }

    fn stat_subgrad(&self, stat: &MeanStat, x: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = self.modulus * (x[i] - self.center[i] - self.noise * stat.mean[i]);
        }
    }

    fn stat_minimum(&self, stat: &MeanStat) -> Option<(Vec<f64>, f64)> {
        let target: Vec<f64> = self
            .center
            .iter()
            .zip(&stat.mean)
            .map(|(c, e)| c + self.noise * e)
            .collect();
        let x = project(&target, &self.meta.domain).ok()?;
        let v = self.stat_loss(stat, &x);
        Some((x, v))
    }
}

/// Noise of [`AbsRegression`]: the sampled direction and the offset sign
/// (`-1`, `0` or `+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsXi {
    pub dir: usize,
    pub sign: i8,
}

/// Per-direction counts of a frozen [`AbsRegression`] sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsStat {
    /// `[minus, zero, plus]` counts per direction.
    pub counts: Vec<[u64; 3]>,
    pub n: usize,
}

/// Offset probabilities for `-eta`, `0`, `+eta`.
const ABS_PROBS: [f64; 3] = [0.25, 0.5, 0.25];

/// Coupling of consecutive active coordinates in the directions; irrational so
/// that subgradient steps do not live on a lattice.
const ABS_COUPLING: f64 = 0.309_016_994_374_947_4;

/// `f(x, xi) = |<a(xi), x> - b(xi)|` with `a(xi)` uniform over `n_dir` fixed
/// unit vectors `a_j ~ e_j + c e_{j+1 mod n_dir}` (just `e_0` when
/// `n_dir = 1`) and `b(xi) = <a(xi), x_true> + e`, where the offset `e` is
/// `-eta`, `0`, `+eta` with probabilities `1/4, 1/2, 1/4`.
///
/// Each direction contributes `phi(<a_j, x - x_true>)` with
/// `phi(s) = |s+eta|/4 + |s|/2 + |s-eta|/4`, so `F* = eta/2 = E|e|`. The
/// directions are linearly independent, so the solution set is
/// `{x : x_j = x_true_j, j < n_dir}` intersected with the ball.
#[derive(Debug, Clone)]
pub struct AbsRegression {
    n_dir: usize,
    offset: f64,
    tau: f64,
    /// Weights of `e_j` and `e_{j+1}` in `a_j`.
    weights: (f64, f64),
    meta: OracleMeta,
}

impl AbsRegression {
    /// `x_true` puts `tau = (R / 2) n_dir^(-1/p)` on each active coordinate, so
    /// `||x_true||_p = R / 2`.
    pub fn new(d: usize, n_dir: usize, offset: f64, radius: f64, p: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", "abs regression needs d >= 2"));
        }
        if n_dir == 0 || n_dir >= d {
            return Err(invalid("n_dir", format!("need 1 <= n_dir < d, got {n_dir}")));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(invalid("noise", format!("{offset} must be nonnegative")));
        }
        let domain = PBall::new(p, radius, d)?;
        let tau = if p.is_infinite() {
            0.5 * radius
        } else {
            0.5 * radius * (n_dir as f64).powf(-1.0 / p)
        };
        let c = ABS_COUPLING;
        let weights = if n_dir == 1 {
            (1.0, 0.0)
        } else {
            let norm = (1.0 + c * c).sqrt();
            (1.0 / norm, c / norm)
        };
        let q = domain.dual_exponent();
        let lipschitz = if n_dir == 1 {
            1.0
        } else {
            lp_norm(&[weights.0, weights.1], q)
        };
        // sum_j |<a_j, u>| >= sigma_min(A) ||u||_2, sigma_min >= (1 - c) / norm
        let sigma_min = if n_dir == 1 { 1.0 } else { weights.0 - weights.1 };
        let to_p = if p <= 2.0 {
            (n_dir as f64).powf(0.5 - 1.0 / p)
        } else {
            1.0
        };
        Ok(Self {
            n_dir,
            offset,
            tau,
            weights,
            meta: OracleMeta {
                lipschitz,
                mu: 0.0,
                growth: Some(Growth {
                    gamma: 1.0,
                    mu_gamma: 0.5 * sigma_min * to_p / n_dir as f64,
                }),
                lambda: None,
                domain,
            },
        })
    }

    pub fn n_dir(&self) -> usize {
        self.n_dir
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn x_true(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        x[..self.n_dir].iter_mut().for_each(|v| *v = self.tau);
        x
    }

    /// Direction `a_j` as `[(index, weight); 2]`.
    pub fn direction(&self, j: usize) -> [(usize, f64); 2] {
        [(j, self.weights.0), ((j + 1) % self.n_dir, self.weights.1)]
    }

    /// `<a_j, x - x_true>`.
    fn residual(&self, j: usize, x: &[f64]) -> f64 {
        self.direction(j)
            .iter()
            .map(|&(i, w)| w * (x[i] - self.tau))
            .sum()
    }

    /// Expected loss of one direction at residual `s`.
    fn phi(&self, s: f64) -> f64 {
        let e = self.offset;
        ABS_PROBS[0] * (s + e).abs() + ABS_PROBS[1] * s.abs() + ABS_PROBS[2] * (s - e).abs()
    }

    /// Right derivative of [`Self::phi`].
    fn phi_right(&self, s: f64) -> f64 {
        let e = self.offset;
        let r = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
        ABS_PROBS[0] * r(s + e) + ABS_PROBS[1] * r(s) + ABS_PROBS[2] * r(s - e)
    }

    /// Active coordinates with prescribed residuals `s_j = <a_j, x - x_true>`.
    fn solve_residuals(&self, s: &[f64]) -> Vec<f64> {
        let (w0, w1) = self.weights;
        let n = self.n_dir;
        let mut u = vec![0.0; n];
        if n == 1 {
            u[0] = s[0] / w0;
        } else {
            // w0 u_j + w1 u_{j+1} = s_j cyclically
            let r = -w1 / w0;
            let mut acc = 0.0;
            let mut pow = 1.0;
            for &sj in s {
                acc += pow * sj / w0;
                pow *= r;
            }
            u[0] = acc / (1.0 - pow);
            for j in (1..n).rev() {
                let next = if j + 1 == n { u[0] } else { u[j + 1] };
                u[j] = (s[j] - w1 * next) / w0;
            }
        }
        u.iter().map(|v| v + self.tau).collect()
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl StochasticProblem for AbsRegression {
    type Xi = AbsXi;
    type Stat = AbsStat;

    fn meta(&self) -> &OracleMeta {
        &self.meta
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AbsXi {
        let dir = rng.random_range(0..self.n_dir);
        let sign = match rng.random_range(0..4u8) {
            0 => -1,
            3 => 1,
            _ => 0,
        };
        AbsXi { dir, sign }
    }

    fn loss(&self, x: &[f64], xi: &AbsXi) -> f64 {
        (self.residual(xi.dir, x) - f64::from(xi.sign) * self.offset).abs()
    }

    fn subgrad(&self, x: &[f64], xi: &AbsXi, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let g = sign0(self.residual(xi.dir, x) - f64::from(xi.sign) * self.offset);
        for (i, w) in self.direction(xi.dir) {
            out[i] += w * g;
        }
    }

    fn lipschitz_at(&self, _xi: &AbsXi) -> f64 {
        self.meta.lipschitz
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.n_dir).map(|j| self.phi(self.residual(j, x))).sum();
        s / self.n_dir as f64
    }

    fn true_opt(&self) -> Option<(Vec<f64>, f64)> {
        Some((self.x_true(), 0.5 * self.offset))
    }

    fn nearest_solution(&self, x0: &[f64], _prox: &ProxSetup) -> Option<Vec<f64>> {
        // the solution set fixes the active coordinates and leaves the rest free
        let mut x = x0.to_vec();
        x[..self.n_dir].iter_mut().for_each(|v| *v = self.tau);
        self.meta.domain.contains(&x).then_some(x)
    }

    fn regularized_opt(&self, mu: f64, center: &[f64], prox: &ProxSetup) -> Option<(Vec<f64>, f64)> {
        if center.iter().any(|&c| c != 0.0) || prox.dim != self.dim() {
            return None;
        }
        // cyclic symmetry: the minimizer is t * 1_{n_dir} with t in [0, tau],
        // minimizing phi(k (t - tau)) + q t^2
        let k = self.weights.0 + self.weights.1;
        let q = 0.5 * mu * prox.beta() * (self.n_dir as f64).powf(2.0 / prox.a);
        let slope = |t: f64| 2.0 * q * t + k * self.phi_right(k * (t - self.tau));
        let (mut lo, mut hi) = (0.0, self.tau);
        if slope(0.0) >= 0.0 {
            hi = 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if slope(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut x = vec![0.0; self.dim()];
        x[..self.n_dir].iter_mut().for_each(|v| *v = hi);
        let val = self.true_value(&x) + mu * prox.psi(&x);
        Some((x, val))
    }

    fn summarize(&self, sample: &[AbsXi]) -> AbsStat {
        let mut counts = vec![[0u64; 3]; self.n_dir];
        for xi in sample {
            counts[xi.dir][(xi.sign + 1) as usize] += 1;
        }
        AbsStat {
            counts,
            n: sample.len(),
        }
    }

    fn stat_loss(&self, stat: &AbsStat, x: &[f64]) -> f64 {
        let e = self.offset;
        let mut s = 0.0;
        for (j, c) in stat.counts.iter().enumerate() {
            let t = self.residual(j, x);
            s += c[0] as f64 * (t + e).abs() + c[1] as f64 * t.abs() + c[2] as f64 * (t - e).abs();
        }
        s / stat.n as f64
    }

    fn stat_subgrad(&self, stat: &AbsStat, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let e = self.offset;
        let inv = 1.0 / stat.n as f64;
        for (j, c) in stat.counts.iter().enumerate() {
            let t = self.residual(j, x);
            let g = inv
                * (c[0] as f64 * sign0(t + e) + c[1] as f64 * sign0(t) + c[2] as f64 * sign0(t - e));
            for (i, w) in self.direction(j) {
                out[i] += w * g;
            }
        }
    }

    fn stat_minimum(&self, stat: &AbsStat) -> Option<(Vec<f64>, f64)> {
        // residuals decouple; per direction a breakpoint is optimal, ties go to 0
        let e = self.offset;
        let s: Vec<f64> = stat
            .counts
            .iter()
            .map(|c| {
                let cost = |t: f64| {
                    c[0] as f64 * (t + e).abs() + c[1] as f64 * t.abs() + c[2] as f64 * (t - e).abs()
                };
                let mut best = 0.0;
                for t in [-e, e] {
                    if cost(t) < cost(best) {
                        best = t;
                    }
                }
                best
            })
            .collect();
        let mut x = vec![0.0; self.dim()];
        x[..self.n_dir].copy_from_slice(&self.solve_residuals(&s));
        if !self.meta.domain.contains(&x) {
            return None;
        }
        let v = self.stat_loss(stat, &x);
        Some((x, v))
    }
}

/// Gaussian noise for both blocks of [`SharpSaddle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleXi {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleStat {
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub n: usize,
}

/// `f(x, y, xi) = mu_x ||x|| - mu_y ||y|| + s <xi_x, x> + s <xi_y, y>` on
/// `B_2^{d_x}(1) x B_2^{d_y}(1)`: sharp (gamma = 1) growth in both blocks,
/// saddle point at the origin.
#[derive(Debug, Clone)]
pub struct SharpSaddle {
    mu_x: f64,
    mu_y: f64,
    noise: f64,
    meta_x: OracleMeta,
    meta_y: OracleMeta,
}

impl SharpSaddle {
    pub fn new(dx: usize, dy: usize, mu_x: f64, mu_y: f64, noise: f64) -> Result<Self> {
        positive("mu_x", mu_x)?;
        positive("mu_y", mu_y)?;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(invalid("noise", format!("{noise} must be nonnegative")));
        }
        let meta = |d: usize, mu: f64| -> Result<OracleMeta> {
            Ok(OracleMeta {
                lipschitz: (mu * mu + noise * noise * d as f64).sqrt(),
                mu: 0.0,
                growth: Some(Growth {
                    gamma: 1.0,
                    mu_gamma: mu,
                }),
                lambda: Some(noise),
                domain: PBall::new(2.0, 1.0, d)?,
            })
        };
        Ok(Self {
            mu_x,
            mu_y,
            noise,
            meta_x: meta(dx, mu_x)?,
            meta_y: meta(dy, mu_y)?,
        })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Minimizer over the unit ball of `mu ||x|| + s <m, x>`.
    fn radial_min(&self, mu: f64, m: &[f64]) -> Vec<f64> {
        let n = norm2(m);
        if self.noise * n > mu {
            m.iter().map(|v| -v / n).collect()
        } else {
            vec![0.0; m.len()]
        }
    }
}

fn unit_or_zero(v: &[f64], c: f64, out: &mut [f64]) {
    let n = norm2(v);
    if n == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
    } else {
        for (o, vi) in out.iter_mut().zip(v) {
            *o = c * vi / n;
        }
    }
}

impl SaddleProblem for SharpSaddle {
    type Xi = SaddleXi;
    type Stat = SaddleStat;

    fn meta_x(&self) -> &OracleMeta {
        &self.meta_x
    }

    fn meta_y(&self) -> &OracleMeta {
        &self.meta_y
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SaddleXi {
        let x = gaussian_vec(rng, self.meta_x.domain.dim);
        let y = gaussian_vec(rng, self.meta_y.domain.dim);
        SaddleXi { x, y }
    }

    fn loss(&self, x: &[f64], y: &[f64], xi: &SaddleXi) -> f64 {
        self.mu_x * norm2(x) - self.mu_y * norm2(y)
            + self.noise * (dot(&xi.x, x) + dot(&xi.y, y))
    }

    fn subgrad_x(&self, x: &[f64], _y: &[f64], xi: &SaddleXi, out: &mut [f64]) {
        unit_or_zero(x, self.mu_x, out);
        for (o, e) in out.iter_mut().zip(&xi.x) {
            *o += self.noise * e;
        }
    }

    fn supergrad_y(&self, _x: &[f64], y: &[f64], xi: &SaddleXi, out: &mut [f64]) {
        unit_or_zero(y, -self.mu_y, out);
        for (o, e) in out.iter_mut().zip(&xi.y) {
            *o += self.noise * e;
        }
    }

    fn true_value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mu_x * norm2(x) - self.mu_y * norm2(y)
    }

    fn best_response_x(&self, _y: &[f64]) -> Vec<f64> {
        vec![0.0; self.meta_x.domain.dim]
    }

    fn best_response_y(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.meta_y.domain.dim]
    }

    fn summarize(&self, sample: &[SaddleXi]) -> SaddleStat {
        let dx = self.meta_x.domain.dim;
        let dy = self.meta_y.domain.dim;
        SaddleStat {
            mean_x: pairwise_mean_vec(sample.len(), dx, &|k, out| out.copy_from_slice(&sample[k].x)),
            mean_y: pairwise_mean_vec(sample.len(), dy, &|k, out| out.copy_from_slice(&sample[k].y)),
            n: sample.len(),
        }
    }

    fn stat_loss(&self, stat: &SaddleStat, x: &[f64], y: &[f64]) -> f64 {
        self.mu_x * norm2(x) - self.mu_y * norm2(y)
            + self.noise * (dot(&stat.mean_x, x) + dot(&stat.mean_y, y))
    }

    fn stat_subgrad_x(&self, stat: &SaddleStat, x: &[f64], _y: &[f64], out: &mut [f64]) {
        unit_or_zero(x, self.mu_x, out);
        for (o, e) in out.iter_mut().zip(&stat.mean_x) {
            *o += self.noise * e;
        }
    }

    fn stat_supergrad_y(&self, stat: &SaddleStat, _x: &[f64], y: &[f64], out: &mut [f64]) {
        unit_or_zero(y, -self.mu_y, out);
        for (o, e) in out.iter_mut().zip(&stat.mean_y) {
            *o += self.noise * e;
        }
    }

    fn stat_best_response_x(&self, stat: &SaddleStat, _y: &[f64]) -> Vec<f64> {
        self.radial_min(self.mu_x, &stat.mean_x)
    }

    fn stat_best_response_y(&self, stat: &SaddleStat, _x: &[f64]) -> Vec<f64> {
        // argmax of -mu_y ||y|| + s <m, y> = argmin of mu_y ||y|| + s <-m, y>
        let neg: Vec<f64> = stat.mean_y.iter().map(|v| -v).collect();
        self.radial_min(self.mu_y, &neg)
    }
}

/// `||x||_q` of the per-problem subgradient, used by property tests.
pub fn dual_norm_of(meta: &OracleMeta, g: &[f64]) -> f64 {
    lp_norm(g, meta.domain.dual_exponent())
}
