//! Offline solvers: freeze a sample, then minimize the empirical mean with a
//! deterministic method whose iteration count certifies the accuracy.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::pgeom::{PBall, ProxSetup};
use crate::problems::{SaddleProblem, StochasticProblem};
use crate::sa::{reach, run_md, step_fn, Averaging, Geometry, SaddleGeometry, StepRule};
use crate::summation::{pairwise_mean, pairwise_mean_vec};

/// Largest inner iteration count a solve may request.
pub const MAX_INNER_ITERATIONS: u64 = 1_000_000_000;

/// Empirical mean objective of a frozen sample.
#[derive(Debug, Clone)]
pub struct EmpiricalObjective<'a, P: StochasticProblem> {
    problem: &'a P,
    sample: Vec<P::Xi>,
    stat: P::Stat,
    m_hat: f64,
}

impl<'a, P: StochasticProblem> EmpiricalObjective<'a, P> {
    /// Draws `n` samples.
    pub fn build<R: Rng + ?Sized>(problem: &'a P, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "sample size must be at least 1"));
        }
        let sample = (0..n).map(|_| problem.sample(rng)).collect();
        Self::from_sample(problem, sample)
    }

    pub fn from_sample(problem: &'a P, sample: Vec<P::Xi>) -> Result<Self> {
        if sample.is_empty() {
            return Err(invalid("sample", "sample must not be empty"));
        }
        let stat = problem.summarize(&sample);
        let m_hat = pairwise_mean(sample.len(), &|k| problem.lipschitz_at(&sample[k]));
        Ok(Self {
            problem,
            sample,
            stat,
            m_hat,
        })
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }

    pub fn sample(&self) -> &[P::Xi] {
        &self.sample
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn stat(&self) -> &P::Stat {
        &self.stat
    }

    /// Lipschitz constant of the empirical objective: the sample mean of `M(xi)`.
    pub fn m_hat(&self) -> f64 {
        self.m_hat
    }

    pub fn domain(&self) -> &PBall {
        &self.problem.meta().domain
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        self.problem.stat_loss(&self.stat, x)
    }

    pub fn subgrad(&self, x: &[f64], out: &mut [f64]) {
        self.problem.stat_subgrad(&self.stat, x, out)
    }

    /// `(1/N) sum_k loss(x, xi_k)` by pairwise summation over the sample.
    pub fn direct_loss(&self, x: &[f64]) -> f64 {
        pairwise_mean(self.sample.len(), &|k| self.problem.loss(x, &self.sample[k]))
    }

    pub fn direct_subgrad(&self, x: &[f64]) -> Vec<f64> {
        pairwise_mean_vec(self.sample.len(), x.len(), &|k, out| {
            self.problem.subgrad(x, &self.sample[k], out)
        })
    }

    /// Exact empirical minimizer and minimum, where the problem provides one.
    pub fn minimum(&self) -> Option<(Vec<f64>, f64)> {
        self.problem.stat_minimum(&self.stat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// The iteration count guarantees the target through the mirror-descent bound.
    IterationBound,
    /// The target exceeds the initial gap bound; the start point qualifies.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SAAResult {
    pub point: Vec<f64>,
    pub inner_iterations: u64,
    pub delta_target: f64,
    pub certificate: Certificate,
    /// `F_hat(x) - min F_hat` when the empirical minimum is known in closed form.
    pub realized_gap: Option<f64>,
    pub samples_used: usize,
}

fn iterations_for(omega: f64, m: f64, delta: f64) -> Result<u64> {
    let t = (2.0 * omega * m * m / (delta * delta)).ceil().max(1.0);
    if !(t <= MAX_INNER_ITERATIONS as f64) {
        return Err(Error::Config(format!(
            "inner solve needs {t:e} iterations (cap {MAX_INNER_ITERATIONS})"
        )));
    }
    Ok(t as u64)
}

fn finish<P: StochasticProblem>(
    emp: &EmpiricalObjective<'_, P>,
    point: Vec<f64>,
    iterations: u64,
    delta: f64,
    certificate: Certificate,
) -> SAAResult {
    let realized_gap = emp.minimum().map(|(_, v)| emp.loss(&point) - v);
    SAAResult {
        point,
        inner_iterations: iterations,
        delta_target: delta,
        certificate,
        realized_gap,
        samples_used: emp.len(),
    }
}

/// Deterministic mirror descent on `F_hat` for `T = ceil(2 Omega M_hat^2 / delta^2)`
/// iterations from the ball center, which guarantees `F_hat(x) - min F_hat <= delta`.
pub fn solve_empirical<P: StochasticProblem>(
    emp: &EmpiricalObjective<'_, P>,
    delta: f64,
    prox: &ProxSetup,
) -> Result<SAAResult> {
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    let ball = emp.domain();
    let start = vec![0.0; ball.dim];
    let m = emp.m_hat();
    if delta >= m * ball.radius {
        return Ok(finish(emp, start, 0, delta, Certificate::Vacuous));
    }
    let omega = prox.omega(reach(&start, ball));
    let t = iterations_for(omega, m, delta)?;
    let geom = Geometry {
        ball,
        prox: *prox,
        center: &start,
    };
    let steps = step_fn(StepRule::Auto, omega, m, t as usize);
    let point = run_md(&geom, &start, t as usize, steps, Averaging::Uniform, |x, g| {
        emp.subgrad(x, g);
        Ok(())
    })?;
    Ok(finish(emp, point, t, delta, Certificate::IterationBound))
}

/// Solves `F_hat` to `delta = mu eps^2` by restarted deterministic mirror
/// descent, using quadratic growth `F_hat(x) - min F_hat >= (mu/2) dist^2`:
/// stage `j` targets `delta_j = delta 2^(J - j)` and the next stage radius is
/// `sqrt(2 delta_j / mu)`.
pub fn solve_empirical_sc<P: StochasticProblem>(
    emp: &EmpiricalObjective<'_, P>,
    mu: f64,
    eps: f64,
    prox: &ProxSetup,
) -> Result<SAAResult> {
    if !(mu > 0.0) {
        return Err(invalid("mu", format!("{mu} must be positive")));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", format!("{eps} must be positive")));
    }
    let delta = mu * eps * eps;
    let ball = emp.domain();
    let m = emp.m_hat();
    let mut x = vec![0.0; ball.dim];
    let mut radius = reach(&x, ball);
    let plan = crate::sa::restart_plan(m * radius, delta);
    if plan.targets.is_empty() {
        return Ok(finish(emp, x, 0, delta, Certificate::Vacuous));
    }
    let mut total = 0u64;
    for &target in &plan.targets {
        let omega = prox.omega(radius);
        let t = iterations_for(omega, m, target)?;
        total += t;
        if total > MAX_INNER_ITERATIONS {
            return Err(Error::Config(format!(
                "inner solve needs more than {MAX_INNER_ITERATIONS} iterations"
            )));
        }
        let center = x.clone();
        let geom = Geometry {
            ball,
            prox: *prox,
            center: &center,
        };
        let steps = step_fn(StepRule::Auto, omega, m, t as usize);
        x = run_md(&geom, &center, t as usize, steps, Averaging::Uniform, |q, g| {
            emp.subgrad(q, g);
            Ok(())
        })?;
        radius = (2.0 * target / mu).sqrt().min(2.0 * ball.radius);
    }
    Ok(finish(emp, x, total, delta, Certificate::IterationBound))
}

/// Accuracy rule of [`saa_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SaaMethod {
    /// Solve to a fixed `delta`.
    Plain { delta: f64 },
    /// Solve to `mu eps^2` with restarts.
    StronglyConvex { mu: f64, eps: f64 },
}

/// Draws `n` samples and solves the empirical problem.
pub fn saa_pipeline<P: StochasticProblem, R: Rng + ?Sized>(
    problem: &P,
    n: usize,
    method: SaaMethod,
    prox: &ProxSetup,
    rng: &mut R,
) -> Result<SAAResult> {
    let emp = EmpiricalObjective::build(problem, n, rng)?;
    match method {
        SaaMethod::Plain { delta } => solve_empirical(&emp, delta, prox),
        SaaMethod::StronglyConvex { mu, eps } => solve_empirical_sc(&emp, mu, eps, prox),
    }
}

/// Empirical mean objective of a frozen saddle sample.
#[derive(Debug, Clone)]
pub struct EmpiricalSaddle<'a, P: SaddleProblem> {
    problem: &'a P,
    stat: P::Stat,
    n: usize,
}

impl<'a, P: SaddleProblem> EmpiricalSaddle<'a, P> {
    pub fn build<R: Rng + ?Sized>(problem: &'a P, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "sample size must be at least 1"));
        }
        let sample: Vec<P::Xi> = (0..n).map(|_| problem.sample(rng)).collect();
        Ok(Self::from_sample(problem, &sample))
    }

    pub fn from_sample(problem: &'a P, sample: &[P::Xi]) -> Self {
        Self {
            problem,
            stat: problem.summarize(sample),
            n: sample.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn loss(&self, x: &[f64], y: &[f64]) -> f64 {
        self.problem.stat_loss(&self.stat, x, y)
    }

    /// `(F_hat(x, y) - min_u F_hat(u, y), max_v F_hat(x, v) - F_hat(x, y))`.
    pub fn gaps(&self, x: &[f64], y: &[f64]) -> (f64, f64) {
        let v = self.loss(x, y);
        let bx = self.problem.stat_best_response_x(&self.stat, y);
        let by = self.problem.stat_best_response_y(&self.stat, x);
        (v - self.loss(&bx, y), self.loss(x, &by) - v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSaaConfig {
    pub eps: f64,
    /// Total mirror-prox iterations allowed across epochs.
    pub max_iterations: usize,
    pub start_x: Option<Vec<f64>>,
    pub start_y: Option<Vec<f64>>,
}

impl SaddleSaaConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            max_iterations: 10_000_000,
            start_x: None,
            start_y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSaaResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub gap_x: f64,
    pub gap_y: f64,
    pub samples_used: usize,
}

/// Builds the empirical saddle problem and runs deterministic mirror-prox in
/// doubling epochs until both empirical best-response gaps are at most `eps / 4`.
pub fn saa_saddle<P: SaddleProblem, R: Rng + ?Sized>(
    problem: &P,
    n: usize,
    cfg: &SaddleSaaConfig,
    rng: &mut R,
) -> Result<SaddleSaaResult> {
    if !(cfg.eps > 0.0) {
        return Err(invalid("eps", format!("{} must be positive", cfg.eps)));
    }
    let emp = EmpiricalSaddle::build(problem, n, rng)?;
    solve_empirical_saddle(&emp, cfg)
}

pub fn solve_empirical_saddle<P: SaddleProblem>(
    emp: &EmpiricalSaddle<'_, P>,
    cfg: &SaddleSaaConfig,
) -> Result<SaddleSaaResult> {
    let problem = emp.problem;
    let target = cfg.eps / 4.0;
    let (mx, my) = (problem.meta_x(), problem.meta_y());
    let x0 = crate::sa::start_point(cfg.start_x.as_deref(), &mx.domain)?;
    let y0 = crate::sa::start_point(cfg.start_y.as_deref(), &my.domain)?;
    let (gx0, gy0) = emp.gaps(&x0, &y0);
    if gx0 <= target && gy0 <= target {
        return Ok(SaddleSaaResult {
            x: x0,
            y: y0,
            iterations: 0,
            gap_x: gx0,
            gap_y: gy0,
            samples_used: emp.len(),
        });
    }
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
    let stat = &emp.stat;
    let mut gx = vec![0.0; x0.len()];
    let mut gy = vec![0.0; y0.len()];
    let mut used = 0usize;
    let mut epoch_len = 1usize;
    let (mut last_gx, mut last_gy) = (gx0, gy0);
    while used + epoch_len <= cfg.max_iterations {
        let h = (2.0 * omega).sqrt() / (m * (2.0 * epoch_len as f64).sqrt());
        let (mut x, mut y) = (x0.clone(), y0.clone());
        let mut sx = vec![0.0; x.len()];
        let mut sy = vec![0.0; y.len()];
        for k in 1..=epoch_len {
            problem.stat_subgrad_x(stat, &x, &y, &mut gx);
            problem.stat_supergrad_y(stat, &x, &y, &mut gy);
            crate::sa::check_finite(&gx, &gy, used + k)?;
            let (ux, uy) = geom.step(&x, &y, &gx, &gy, h)?;
            problem.stat_subgrad_x(stat, &ux, &uy, &mut gx);
            problem.stat_supergrad_y(stat, &ux, &uy, &mut gy);
            crate::sa::check_finite(&gx, &gy, used + k)?;
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
        used += epoch_len;
        let inv = 1.0 / epoch_len as f64;
        sx.iter_mut().for_each(|v| *v *= inv);
        sy.iter_mut().for_each(|v| *v *= inv);
        let (gap_x, gap_y) = emp.gaps(&sx, &sy);
        if gap_x <= target && gap_y <= target {
            return Ok(SaddleSaaResult {
                x: sx,
                y: sy,
                iterations: used,
                gap_x,
                gap_y,
                samples_used: emp.len(),
            });
        }
        last_gx = gap_x;
        last_gy = gap_y;
        epoch_len *= 2;
    }
    Err(Error::SaddleCap {
        cap: cfg.max_iterations,
        gap_x: last_gx,
        gap_y: last_gy,
        target,
    })
}
