//! Online solvers: one fresh sample per step.
//!
//! Projected SGD and mirror descent share one core loop; the restarted
//! scheme chains mirror-descent stages with shrinking prox radii, and the
//! saddle solver is a stochastic extragradient (mirror-prox) method.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::pgeom::{lp_norm, norm2, project, PBall, ProxSetup};
use crate::problems::{Growth, SaddleProblem, StochasticProblem};

/// Step size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `h = sqrt(2 Omega) / (M sqrt(N))`, with `Omega` the prox bound on the
    /// distance from the start to any solution. At `p = 2` this is `R / (M sqrt(N))`.
    Auto,
    Constant(f64),
    /// `h_k = c / sqrt(k)`.
    Decreasing(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Uniform average of the points where the oracle was queried.
    Uniform,
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SAConfig {
    pub n_steps: usize,
    pub step: StepRule,
    pub averaging: Averaging,
    /// Prox setup for mirror descent; defaults to the one matched to the domain.
    pub prox: Option<ProxSetup>,
    /// Start point; projected onto the domain. Defaults to the ball center.
    pub start: Option<Vec<f64>>,
}

impl SAConfig {
    pub fn new(n_steps: usize) -> Self {
        Self {
            n_steps,
            step: StepRule::Auto,
            averaging: Averaging::Uniform,
            prox: None,
            start: None,
        }
    }

    pub fn with_step(mut self, step: StepRule) -> Self {
        self.step = step;
        self
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_prox(mut self, prox: ProxSetup) -> Self {
        self.prox = Some(prox);
        self
    }

    pub fn with_start(mut self, start: Vec<f64>) -> Self {
        self.start = Some(start);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "need at least one step"));
        }
        match self.step {
            StepRule::Constant(h) | StepRule::Decreasing(h) if !(h >= 0.0 && h.is_finite()) => {
                Err(invalid("step", format!("{h} must be finite and nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

/// One stage of a restarted run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    /// Prox radius around the stage start.
    pub radius: f64,
    /// Accuracy targeted by the stage.
    pub target: f64,
    pub samples: usize,
    /// Confidence share assigned to the stage.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SAResult {
    pub point: Vec<f64>,
    pub samples_used: usize,
    /// Per-stage summary of restarted runs; empty otherwise.
    pub stages: Vec<StageSummary>,
}

/// Domain, prox setup and prox center of a mirror-descent run.
pub(crate) struct Geometry<'a> {
    pub ball: &'a PBall,
    pub prox: ProxSetup,
    pub center: &'a [f64],
}

impl Geometry<'_> {
    fn step(&self, x: &mut Vec<f64>, g: &[f64], h: f64) -> Result<()> {
        if self.prox.is_euclidean() && self.ball.p == 2.0 {
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi -= h * gi;
            }
            let n = norm2(x);
            if n > self.ball.radius {
                let s = self.ball.radius / n;
                x.iter_mut().for_each(|v| *v *= s);
            }
            Ok(())
        } else {
            *x = self.prox.mirror_step(self.center, x, g, h, self.ball)?;
            Ok(())
        }
    }
}

/// Runs `n` mirror-descent steps from `start`. `oracle` fills the
/// (sub)gradient at the query point; the uniform average runs over the `n`
/// query points.
pub(crate) fn run_md<O>(
    geom: &Geometry<'_>,
    start: &[f64],
    n: usize,
    step: impl Fn(usize) -> f64,
    averaging: Averaging,
    mut oracle: O,
) -> Result<Vec<f64>>
where
    O: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let d = start.len();
    let mut x = start.to_vec();
    let mut g = vec![0.0; d];
    let mut sum = vec![0.0; d];
    for k in 1..=n {
        oracle(&x, &mut g)?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        if averaging == Averaging::Uniform {
            for (s, xi) in sum.iter_mut().zip(&x) {
                *s += xi;
            }
        }
        geom.step(&mut x, &g, step(k))?;
    }
    if averaging == Averaging::Uniform && n > 0 {
        let inv = 1.0 / n as f64;
        sum.iter_mut().for_each(|v| *v *= inv);
        Ok(sum)
    } else {
        Ok(x)
    }
}

/// Step sequence for `n` steps with prox bound `omega` and Lipschitz bound `m`.
pub(crate) fn step_fn(rule: StepRule, omega: f64, m: f64, n: usize) -> impl Fn(usize) -> f64 {
    let auto = if m > 0.0 && n > 0 {
        (2.0 * omega).sqrt() / (m * (n as f64).sqrt())
    } else {
        0.0
    };
    move |k| match rule {
        StepRule::Auto => auto,
        StepRule::Constant(h) => h,
        StepRule::Decreasing(c) => c / (k as f64).sqrt(),
    }
}

pub(crate) fn start_point(start: Option<&[f64]>, ball: &PBall) -> Result<Vec<f64>> {
    match start {
        Some(s) => project(s, ball),
        None => Ok(vec![0.0; ball.dim]),
    }
}

/// Bound on `||x - start||_p` over the ball.
pub(crate) fn reach(start: &[f64], ball: &PBall) -> f64 {
    (ball.radius + lp_norm(start, ball.p)).min(2.0 * ball.radius)
}

fn run_sa<P: StochasticProblem, R: Rng + ?Sized>(
    problem: &P,
    cfg: &SAConfig,
    prox: ProxSetup,
    rng: &mut R,
) -> Result<SAResult> {
    cfg.validate()?;
    let meta = problem.meta();
    let ball = &meta.domain;
    let start = start_point(cfg.start.as_deref(), ball)?;
    let omega = prox.omega(reach(&start, ball));
    let geom = Geometry {
        ball,
        prox,
        center: &start,
    };
    let steps = step_fn(cfg.step, omega, meta.lipschitz, cfg.n_steps);
    let point = run_md(&geom, &start, cfg.n_steps, steps, cfg.averaging, |x, g| {
        let xi = problem.sample(rng);
        problem.subgrad(x, &xi, g);
        Ok(())
    })?;
    Ok(SAResult {
        point,
        samples_used: cfg.n_steps,
        stages: Vec::new(),
    })
}

/// Projected SGD `x <- pi_X(x - h g)`; ignores `cfg.prox`.
pub fn sgd_projected<P: StochasticProblem, R: Rng + ?Sized>(
    problem: &P,
    cfg: &SAConfig,
    rng: &mut R,
) -> Result<SAResult> {
    run_sa(problem, cfg, ProxSetup::euclidean(problem.dim()), rng)
}

/// Stochastic mirror descent with the configured prox setup (or the one
/// matched to the domain). Domains with `p > 2` use projected SGD.
pub fn mirror_descent<P: StochasticProblem, R: Rng + ?Sized>(
    problem: &P,
    cfg: &SAConfig,
    rng: &mut R,
) -> Result<SAResult> {
    let ball = &problem.meta().domain;
    let prox = match cfg.prox {
        _ if ball.p > 2.0 => ProxSetup::euclidean(ball.dim),
        Some(px) => {
            if px.dim != ball.dim {
                return Err(Error::DimensionMismatch {
                    expected: ball.dim,
                    got: px.dim,
                });
            }
            px
        }
        None => ProxSetup::for_ball(ball),
    };
    run_sa(problem, cfg, prox, rng)
}

/// Per-stage sample budget of [`restarted_sa`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StageBudget {
    /// `N_j = ceil(C * 2 Omega_j M^2 / eps_j^2)`.
    Theory { const_mult: f64 },
    /// Split a total budget across stages in proportion to the theory budgets.
    Total(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartConfig {
    pub eps: f64,
    pub sigma: f64,
    pub growth: Growth,
    pub budget: StageBudget,
    pub prox: Option<ProxSetup>,
    pub start: Option<Vec<f64>>,
}

impl RestartConfig {
    pub fn new(eps: f64, sigma: f64, growth: Growth) -> Self {
        Self {
            eps,
            sigma,
            growth,
            budget: StageBudget::Theory { const_mult: 4.0 },
            prox: None,
            start: None,
        }
    }

    pub fn with_budget(mut self, budget: StageBudget) -> Self {
        self.budget = budget;
        self
    }
}

/// Stage plan: radii and targets before any sample is drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartPlan {
    pub eps0: f64,
    pub targets: Vec<f64>,
}

/// Number of halvings from the initial gap bound `eps0` down to `eps`.
pub fn restart_plan(eps0: f64, eps: f64) -> RestartPlan {
    let stages = if eps >= eps0 {
        0
    } else {
        (eps0 / eps).log2().ceil() as usize
    };
    let targets = (1..=stages)
        .map(|j| eps * 2f64.powi((stages - j) as i32))
        .collect();
    RestartPlan { eps0, targets }
}

/// Next-stage radius `(2 eps_j / mu_gamma)^(1/gamma)`, capped by the domain diameter.
pub fn next_radius(target: f64, growth: Growth, diameter: f64) -> f64 {
    (2.0 * target / growth.mu_gamma)
        .powf(1.0 / growth.gamma)
        .min(diameter)
}

/// Restarted mirror descent for problems with `gamma`-growth. Stage `j`
/// targets `eps_j = eps 2^(J - j)` and restarts the prox center at the
/// previous stage output; iterates stay in the full domain while the prox
/// radius shrinks.
pub fn restarted_sa<P: StochasticProblem, R: Rng + ?Sized>(
    problem: &P,
    cfg: &RestartConfig,
    rng: &mut R,
) -> Result<SAResult> {
    let g = cfg.growth;
    if !(g.gamma >= 1.0) {
        return Err(invalid("gamma", format!("{} must be >= 1", g.gamma)));
    }
    if !(g.mu_gamma > 0.0) {
        return Err(invalid("mu_gamma", format!("{} must be positive", g.mu_gamma)));
    }
    if !(cfg.eps > 0.0) {
        return Err(invalid("eps", format!("{} must be positive", cfg.eps)));
    }
    let meta = problem.meta();
    let ball = &meta.domain;
    let m = meta.lipschitz;
    let prox = match cfg.prox {
        Some(px) => px,
        None => ProxSetup::for_ball(ball),
    };
    let mut x = start_point(cfg.start.as_deref(), ball)?;
    let diameter = 2.0 * ball.radius;
    let first_radius = reach(&x, ball);
    let plan = restart_plan(m * first_radius, cfg.eps);
    let stages_n = plan.targets.len();
    if stages_n == 0 {
        return Ok(SAResult {
            point: x,
            samples_used: 0,
            stages: Vec::new(),
        });
    }

    let mut radii = Vec::with_capacity(stages_n);
    let mut r = first_radius;
    for &t in &plan.targets {
        radii.push(r);
        r = next_radius(t, g, diameter);
    }
    let weights: Vec<f64> = radii
        .iter()
        .zip(&plan.targets)
        .map(|(&r, &t)| 2.0 * prox.omega(r) * m * m / (t * t))
        .collect();
    let budgets: Vec<usize> = match cfg.budget {
        StageBudget::Theory { const_mult } => {
            if !(const_mult > 0.0) {
                return Err(invalid("const_mult", "must be positive"));
            }
            weights
                .iter()
                .map(|w| (const_mult * w).ceil().max(1.0) as usize)
                .collect()
        }
        StageBudget::Total(total) => split_budget(total, &weights),
    };

    let sigma_j = cfg.sigma / stages_n as f64;
    let mut stages = Vec::with_capacity(stages_n);
    let mut used = 0;
    for ((&radius, &target), &n) in radii.iter().zip(&plan.targets).zip(&budgets) {
        if n > 0 {
            let center = x.clone();
            let geom = Geometry {
                ball,
                prox,
                center: &center,
            };
            let steps = step_fn(StepRule::Auto, prox.omega(radius), m, n);
            x = run_md(&geom, &center, n, steps, Averaging::Uniform, |q, gr| {
                let xi = problem.sample(rng);
                problem.subgrad(q, &xi, gr);
                Ok(())
            })?;
        }
        used += n;
        stages.push(StageSummary {
            radius,
            target,
            samples: n,
            sigma: sigma_j,
        });
    }
    Ok(SAResult {
        point: x,
        samples_used: used,
        stages,
    })
}

/// Largest-remainder split of `total` proportional to `weights`.
pub(crate) fn split_budget(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    let shares: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let mut rest = total - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(b.cmp(&a))
    });
    for &i in &order {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleConfig {
    pub n_steps: usize,
    pub step: StepRule,
    pub start_x: Option<Vec<f64>>,
    pub start_y: Option<Vec<f64>>,
}

impl SaddleConfig {
    pub fn new(n_steps: usize) -> Self {
        Self {
            n_steps,
            step: StepRule::Auto,
            start_x: None,
            start_y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub samples_used: usize,
}

pub(crate) struct SaddleGeometry<'a> {
    pub x: Geometry<'a>,
    pub y: Geometry<'a>,
}

impl SaddleGeometry<'_> {
    /// Extragradient step from `(x, y)` with operator values `(gx, -gy)`.
    pub fn step(&self, x: &[f64], y: &[f64], gx: &[f64], gy: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut nx = x.to_vec();
        let mut ny = y.to_vec();
        self.x.step(&mut nx, gx, h)?;
        let neg: Vec<f64> = gy.iter().map(|v| -v).collect();
        self.y.step(&mut ny, &neg, h)?;
        Ok((nx, ny))
    }
}

/// Stochastic mirror-prox on `X x Y`. Each iteration draws one sample and
/// uses it for both the extrapolation and the update; the output is the
/// uniform average of the extrapolated points.
pub fn sa_saddle<P: SaddleProblem, R: Rng + ?Sized>(
    problem: &P,
    cfg: &SaddleConfig,
    rng: &mut R,
) -> Result<SaddleResult> {
    if cfg.n_steps == 0 {
        return Err(invalid("n_steps", "need at least one step"));
    }
    let (mx, my) = (problem.meta_x(), problem.meta_y());
    let x0 = start_point(cfg.start_x.as_deref(), &mx.domain)?;
    let y0 = start_point(cfg.start_y.as_deref(), &my.domain)?;
    let geom = SaddleGeometry {
        x: Geometry {
            ball: &mx.domain,
            prox: ProxSetup::for_ball(&mx.domain),
            center: &x0,
        },
        y: Geometry {
            ball: &my.domain,
            prox: ProxSetup::for_ball(&my.domain),
            center: &y0,
        },
    };
    let omega = geom.x.prox.omega(reach(&x0, &mx.domain)) + geom.y.prox.omega(reach(&y0, &my.domain));
    let m = (mx.lipschitz.powi(2) + my.lipschitz.powi(2)).sqrt();
    let steps = step_fn(cfg.step, omega, m, cfg.n_steps);
    let n = cfg.n_steps;
    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; y.len()];
    let mut sx = vec![0.0; x.len()];
    let mut sy = vec![0.0; y.len()];
    for k in 1..=n {
        // two prox steps per iteration
        let h = steps(k) / std::f64::consts::SQRT_2;
        let xi = problem.sample(rng);
        problem.subgrad_x(&x, &y, &xi, &mut gx);
        problem.supergrad_y(&x, &y, &xi, &mut gy);
        check_finite(&gx, &gy, k)?;
        let (ux, uy) = geom.step(&x, &y, &gx, &gy, h)?;
        problem.subgrad_x(&ux, &uy, &xi, &mut gx);
        problem.supergrad_y(&ux, &uy, &xi, &mut gy);
        check_finite(&gx, &gy, k)?;
        let (nx, ny) = geom.step(&x, &y, &gx, &gy, h)?;
        for (s, v) in sx.iter_mut().zip(&ux) {
            *s += v;
        }
        for (s, v) in sy.iter_mut().zip(&uy) {
            *s += v;
        }
        x = nx;
        y = ny;
    }
    let inv = 1.0 / n as f64;
    sx.iter_mut().for_each(|v| *v *= inv);
    sy.iter_mut().for_each(|v| *v *= inv);
    Ok(SaddleResult {
        x: sx,
        y: sy,
        samples_used: n,
    })
}

pub(crate) fn check_finite(gx: &[f64], gy: &[f64], step: usize) -> Result<()> {
    if gx.iter().chain(gy).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}
