//! Monte Carlo experiments: per-trial success checks against the analytic
//! optimum, success-probability estimates with Clopper-Pearson intervals,
//! minimal sample size search, log-log scaling fits and CSV output.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::pgeom::{PBall, ProxSetup};
use crate::problems::{
    AbsRegression, GaussPower, SaddleProblem, SharpSaddle, StochasticProblem, StronglyConvexQuad,
};
use crate::regularize::{mu_for_eps, regularize};
use crate::sa::{
    mirror_descent, restarted_sa, sa_saddle, sgd_projected, RestartConfig, SAConfig, SaddleConfig,
    StageBudget,
};
use crate::saa::{saa_pipeline, saa_saddle, SaaMethod, SaddleSaaConfig};

/// Exact CSV header.
pub const CSV_HEADER: &str = "run_id,problem,method,p,d,gamma,eps,sigma,n,trials,successes,p_hat,ci_low,ci_high,gap_mean,gap_q90,samples_used_mean,seed";

/// Problem identifier and parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    GaussPower {
        d: usize,
        gamma: f64,
        noise: f64,
    },
    ScQuad {
        d: usize,
        modulus: f64,
        noise: f64,
        radius: f64,
    },
    AbsReg {
        d: usize,
        n_dir: usize,
        noise: f64,
        radius: f64,
        p: f64,
    },
    SharpSaddle {
        dx: usize,
        dy: usize,
        mu_x: f64,
        mu_y: f64,
        noise: f64,
    },
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemSpec::GaussPower { .. } => "gauss-power",
            ProblemSpec::ScQuad { .. } => "sc-quad",
            ProblemSpec::AbsReg { .. } => "abs-reg",
            ProblemSpec::SharpSaddle { .. } => "sharp-saddle",
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            ProblemSpec::AbsReg { p, .. } => *p,
            _ => 2.0,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            ProblemSpec::GaussPower { d, .. }
            | ProblemSpec::ScQuad { d, .. }
            | ProblemSpec::AbsReg { d, .. } => *d,
            ProblemSpec::SharpSaddle { dx, .. } => *dx,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            ProblemSpec::GaussPower { gamma, .. } => *gamma,
            ProblemSpec::ScQuad { .. } => 2.0,
            ProblemSpec::AbsReg { .. } | ProblemSpec::SharpSaddle { .. } => 1.0,
        }
    }

    /// Copy with the dimension replaced (both blocks for saddles).
    pub fn with_d(&self, new_d: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            ProblemSpec::GaussPower { d, .. }
            | ProblemSpec::ScQuad { d, .. }
            | ProblemSpec::AbsReg { d, .. } => *d = new_d,
            ProblemSpec::SharpSaddle { dx, dy, .. } => {
                *dx = new_d;
                *dy = new_d;
            }
        }
        s
    }

    /// Copy with the domain exponent replaced; only abs-reg has a free exponent.
    pub fn with_p(&self, new_p: f64) -> Result<Self> {
        let mut s = self.clone();
        match &mut s {
            ProblemSpec::AbsReg { p, .. } => *p = new_p,
            _ => {
                return Err(Error::Config(format!(
                    "problem {} has a fixed l_2 domain",
                    self.name()
                )))
            }
        }
        Ok(s)
    }

    pub fn build(&self) -> Result<BuiltProblem> {
        Ok(match *self {
            ProblemSpec::GaussPower { d, gamma, noise } => {
                BuiltProblem::Gauss(GaussPower::new(d, gamma, noise)?)
            }
            ProblemSpec::ScQuad {
                d,
                modulus,
                noise,
                radius,
            } => BuiltProblem::Quad(StronglyConvexQuad::with_radius(d, modulus, noise, radius)?),
            ProblemSpec::AbsReg {
                d,
                n_dir,
                noise,
                radius,
                p,
            } => BuiltProblem::Abs(AbsRegression::new(d, n_dir, noise, radius, p)?),
            ProblemSpec::SharpSaddle {
                dx,
                dy,
                mu_x,
                mu_y,
                noise,
            } => BuiltProblem::Saddle(SharpSaddle::new(dx, dy, mu_x, mu_y, noise)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum BuiltProblem {
    Gauss(GaussPower),
    Quad(StronglyConvexQuad),
    Abs(AbsRegression),
    Saddle(SharpSaddle),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    SaSgd,
    SaMd,
    SaRestart,
    Saa,
    SaaSc,
    SaaSaddle,
    SaSaddle,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::SaSgd,
        Method::SaMd,
        Method::SaRestart,
        Method::Saa,
        Method::SaaSc,
        Method::SaaSaddle,
        Method::SaSaddle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SaSgd => "sa-sgd",
            Method::SaMd => "sa-md",
            Method::SaRestart => "sa-restart",
            Method::Saa => "saa",
            Method::SaaSc => "saa-sc",
            Method::SaaSaddle => "saa-saddle",
            Method::SaSaddle => "sa-saddle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn is_saddle(self) -> bool {
        matches!(self, Method::SaaSaddle | Method::SaSaddle)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that determines a trial except the trial index.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub problem: ProblemSpec,
    pub method: Method,
    pub n: usize,
    pub eps: f64,
    pub sigma: f64,
    /// Solve `f + mu V(., 0)` and judge success on the original problem.
    pub regularize: bool,
    /// Regularization weight; defaults to `eps / (2 kappa_p(d) R^2)`.
    pub mu: Option<f64>,
    /// Accuracy of the empirical solve for `saa`; defaults to `eps / 2`
    /// (`eps / 4` when regularized).
    pub delta: Option<f64>,
    /// Saddle methods start from `x0 = start 1/sqrt(d_x)`, `y0 = -start 1/sqrt(d_y)`.
    pub start: f64,
    pub master_seed: u64,
    pub grid_index: u64,
}

impl TrialSpec {
    pub fn new(problem: ProblemSpec, method: Method, n: usize, eps: f64, sigma: f64) -> Self {
        Self {
            problem,
            method,
            n,
            eps,
            sigma,
            regularize: false,
            mu: None,
            delta: None,
            start: 0.0,
            master_seed: 0,
            grid_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub gap: f64,
    pub success: bool,
    pub samples_used: usize,
}

/// splitmix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial seed from `(master_seed, grid_index, trial_index)`.
pub fn trial_seed(master_seed: u64, grid_index: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ grid_index) ^ trial_index)
}

fn saddle_start(ball: &PBall, start: f64, sign: f64) -> Option<Vec<f64>> {
    (start != 0.0).then(|| vec![sign * start / (ball.dim as f64).sqrt(); ball.dim])
}

fn solve_point<P: StochasticProblem>(
    problem: &P,
    spec: &TrialSpec,
    n: usize,
    target: f64,
    regularized: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, usize)> {
    let meta = problem.meta();
    match spec.method {
        Method::SaSgd => {
            let r = sgd_projected(problem, &SAConfig::new(n), rng)?;
            Ok((r.point, r.samples_used))
        }
        Method::SaMd => {
            let r = mirror_descent(problem, &SAConfig::new(n), rng)?;
            Ok((r.point, r.samples_used))
        }
        Method::SaRestart => {
            let growth = meta
                .growth
                .ok_or_else(|| Error::Config("sa-restart needs a growth condition".into()))?;
            let cfg =
                RestartConfig::new(target, spec.sigma, growth).with_budget(StageBudget::Total(n));
            let r = restarted_sa(problem, &cfg, rng)?;
            Ok((r.point, r.samples_used))
        }
        Method::Saa => {
            let delta = spec
                .delta
                .unwrap_or(if regularized { spec.eps / 4.0 } else { spec.eps / 2.0 });
            let prox = ProxSetup::for_ball(&meta.domain);
            let r = saa_pipeline(problem, n, SaaMethod::Plain { delta }, &prox, rng)?;
            Ok((r.point, r.samples_used))
        }
        Method::SaaSc => {
            if !(meta.mu > 0.0) {
                return Err(Error::Config(
                    "saa-sc needs a strongly convex problem (use --regularize)".into(),
                ));
            }
            let prox = ProxSetup::for_ball(&meta.domain);
            let method = SaaMethod::StronglyConvex {
                mu: meta.mu,
                eps: target,
            };
            let r = saa_pipeline(problem, n, method, &prox, rng)?;
            Ok((r.point, r.samples_used))
        }
        Method::SaaSaddle | Method::SaSaddle => Err(Error::Config(format!(
            "method {} needs a saddle problem",
            spec.method
        ))),
    }
}

fn run_stochastic<P: StochasticProblem>(
    problem: &P,
    spec: &TrialSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let (_, f_star) = problem
        .true_opt()
        .ok_or_else(|| Error::Config("problem has no analytic optimum".into()))?;
    let (x, used) = if spec.regularize {
        let ball = problem.meta().domain;
        if ball.p > 2.0 {
            return Err(Error::ProxExponent(ball.p));
        }
        let mu = match spec.mu {
            Some(mu) => mu,
            None => mu_for_eps(spec.eps, ball.p, ball.dim, ball.radius)?,
        };
        let reg = regularize(problem, mu, vec![0.0; ball.dim], ProxSetup::for_ball(&ball))?;
        solve_point(&reg, spec, n, spec.eps / 2.0, true, rng)?
    } else {
        solve_point(problem, spec, n, spec.eps, false, rng)?
    };
    let gap = problem.true_value(&x) - f_star;
    Ok(TrialOutcome {
        gap,
        success: gap <= spec.eps,
        samples_used: used,
    })
}

fn run_saddle<P: SaddleProblem>(
    problem: &P,
    spec: &TrialSpec,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let sx = saddle_start(&problem.meta_x().domain, spec.start, 1.0);
    let sy = saddle_start(&problem.meta_y().domain, spec.start, -1.0);
    let (x, y, used) = match spec.method {
        Method::SaaSaddle => {
            let mut cfg = SaddleSaaConfig::new(spec.eps);
            cfg.start_x = sx;
            cfg.start_y = sy;
            let r = saa_saddle(problem, n, &cfg, rng)?;
            (r.x, r.y, r.samples_used)
        }
        Method::SaSaddle => {
            let mut cfg = SaddleConfig::new(n);
            cfg.start_x = sx;
            cfg.start_y = sy;
            let r = sa_saddle(problem, &cfg, rng)?;
            (r.x, r.y, r.samples_used)
        }
        m => {
            return Err(Error::Config(format!(
                "method {m} does not apply to saddle problems"
            )))
        }
    };
    let gap = problem.duality_gap(&x, &y);
    Ok(TrialOutcome {
        gap,
        success: gap <= spec.eps,
        samples_used: used,
    })
}

fn run_built(built: &BuiltProblem, spec: &TrialSpec, n: usize, seed: u64) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 0 {
        return Err(invalid("n", "sample size must be at least 1"));
    }
    match built {
        BuiltProblem::Gauss(p) => run_stochastic(p, spec, n, &mut rng),
        BuiltProblem::Quad(p) => run_stochastic(p, spec, n, &mut rng),
        BuiltProblem::Abs(p) => run_stochastic(p, spec, n, &mut rng),
        BuiltProblem::Saddle(p) => run_saddle(p, spec, n, &mut rng),
    }
}

/// Runs one trial with `N = spec.n`; `F(x) - F*` (or the duality gap) decides success.
pub fn run_trial(spec: &TrialSpec, trial_index: u64) -> Result<TrialOutcome> {
    ExperimentRunner::new(spec.clone())?.run(spec.n, trial_index)
}

/// Source of trial outcomes for a given sample size.
pub trait TrialRunner: Sync {
    fn run(&self, n: usize, trial: u64) -> Result<TrialOutcome>;
}

/// [`TrialRunner`] backed by a [`TrialSpec`]; the spec's `n` is ignored.
#[derive(Debug, Clone)]
pub struct ExperimentRunner {
    spec: TrialSpec,
    built: BuiltProblem,
}

impl ExperimentRunner {
    pub fn new(spec: TrialSpec) -> Result<Self> {
        if !(spec.eps > 0.0) {
            return Err(invalid("eps", format!("{} must be positive", spec.eps)));
        }
        if !(spec.sigma > 0.0 && spec.sigma < 1.0) {
            return Err(invalid("sigma", format!("{} must lie in (0, 1)", spec.sigma)));
        }
        let built = spec.problem.build()?;
        let saddle_problem = matches!(built, BuiltProblem::Saddle(_));
        if saddle_problem != spec.method.is_saddle() {
            return Err(Error::Config(format!(
                "method {} does not apply to problem {}",
                spec.method,
                spec.problem.name()
            )));
        }
        if spec.regularize && saddle_problem {
            return Err(Error::Config("saddle problems cannot be regularized".into()));
        }
        Ok(Self { spec, built })
    }

    pub fn spec(&self) -> &TrialSpec {
        &self.spec
    }

    pub fn problem(&self) -> &BuiltProblem {
        &self.built
    }
}

impl TrialRunner for ExperimentRunner {
    fn run(&self, n: usize, trial: u64) -> Result<TrialOutcome> {
        let seed = trial_seed(self.spec.master_seed, self.spec.grid_index, trial);
        run_built(&self.built, &self.spec, n, seed).map_err(|e| Error::Trial {
            trial,
            seed,
            source: Box::new(e),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessEstimate {
    pub n: usize,
    pub successes: usize,
    pub trials: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub gap_mean: f64,
    pub gap_q90: f64,
    pub samples_used_mean: f64,
}

/// Two-sided 95% Clopper-Pearson interval for `k` successes out of `n`.
pub fn clopper_pearson(k: usize, n: usize) -> (f64, f64) {
    let alpha = 0.05;
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0)
            .expect("positive shapes")
            .inverse_cdf(alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf)
            .expect("positive shapes")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

/// Aggregates outcomes in trial order.
pub fn summarize_outcomes(n: usize, outcomes: &[TrialOutcome]) -> SuccessEstimate {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let p_hat = successes as f64 / trials as f64;
    let (ci_low, ci_high) = clopper_pearson(successes, trials);
    let mut gaps: Vec<f64> = outcomes.iter().map(|o| o.gap).collect();
    let gap_mean = crate::summation::pairwise_mean(trials, &|k| gaps[k]);
    gaps.sort_by(f64::total_cmp);
    let rank = ((0.9 * trials as f64).ceil() as usize).clamp(1, trials);
    let samples_used_mean =
        crate::summation::pairwise_mean(trials, &|k| outcomes[k].samples_used as f64);
    SuccessEstimate {
        n,
        successes,
        trials,
        p_hat,
        ci_low: ci_low.min(p_hat),
        ci_high: ci_high.max(p_hat),
        gap_mean,
        gap_q90: gaps[rank - 1],
        samples_used_mean,
    }
}

/// Runs `trials` independent trials at sample size `n`. The result does not
/// depend on `parallel`.
pub fn estimate_success<T: TrialRunner + ?Sized>(
    runner: &T,
    n: usize,
    trials: usize,
    parallel: bool,
) -> Result<SuccessEstimate> {
    if trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let outcomes: Vec<TrialOutcome> = if parallel {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| runner.run(n, t))
            .collect::<Result<_>>()?
    } else {
        (0..trials as u64)
            .map(|t| runner.run(n, t))
            .collect::<Result<_>>()?
    };
    Ok(summarize_outcomes(n, &outcomes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub sigma: f64,
    pub trials: usize,
    pub n_lo: usize,
    pub n_hi_cap: usize,
    /// Re-test at `2 n_min` and flag a failure there.
    pub check_monotone: bool,
    pub parallel: bool,
}

impl SearchConfig {
    pub fn new(sigma: f64, trials: usize) -> Self {
        Self {
            sigma,
            trials,
            n_lo: 1,
            n_hi_cap: 1 << 20,
            check_monotone: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStatus {
    Found,
    NotFound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NSearchResult {
    pub status: SearchStatus,
    /// Smallest passing sample size; `None` when the cap was reached.
    pub n_min: Option<usize>,
    /// Largest failing size (0 when `n_lo` already passes) and smallest passing size.
    pub bracket: (usize, usize),
    pub trials_per_point: usize,
    pub decision_rule: String,
    /// Every evaluated sample size, in evaluation order.
    pub evaluations: Vec<SuccessEstimate>,
    pub monotone_violation: bool,
}

impl NSearchResult {
    /// Estimate at the reported `n_min`.
    pub fn at_n_min(&self) -> Option<&SuccessEstimate> {
        let n = self.n_min?;
        self.evaluations.iter().find(|e| e.n == n)
    }
}

/// Doubling from `n_lo` until the point estimate reaches `1 - sigma`, then
/// bisection down to the smallest passing size.
pub fn find_min_n<T: TrialRunner + ?Sized>(runner: &T, cfg: &SearchConfig) -> Result<NSearchResult> {
    if !(cfg.sigma > 0.0 && cfg.sigma < 1.0) {
        return Err(invalid("sigma", format!("{} must lie in (0, 1)", cfg.sigma)));
    }
    if cfg.n_lo == 0 || cfg.n_lo > cfg.n_hi_cap {
        return Err(invalid("n_lo", "need 1 <= n_lo <= n_hi_cap"));
    }
    let threshold = 1.0 - cfg.sigma;
    let mut evaluations: Vec<SuccessEstimate> = Vec::new();
    let eval = |n: usize, evaluations: &mut Vec<SuccessEstimate>| -> Result<bool> {
        if let Some(e) = evaluations.iter().find(|e| e.n == n) {
            return Ok(e.p_hat >= threshold);
        }
        let e = estimate_success(runner, n, cfg.trials, cfg.parallel)?;
        let pass = e.p_hat >= threshold;
        evaluations.push(e);
        Ok(pass)
    };
    let decision_rule = format!(
        "pass iff p_hat >= {threshold} over {} trials; doubling from {} then bisection",
        cfg.trials, cfg.n_lo
    );

    let mut n_fail = 0usize;
    let mut n = cfg.n_lo;
    loop {
        if eval(n, &mut evaluations)? {
            break;
        }
        n_fail = n;
        if n >= cfg.n_hi_cap {
            return Ok(NSearchResult {
                status: SearchStatus::NotFound,
                n_min: None,
                bracket: (n_fail, cfg.n_hi_cap),
                trials_per_point: cfg.trials,
                decision_rule,
                evaluations,
                monotone_violation: false,
            });
        }
        n = n.saturating_mul(2).min(cfg.n_hi_cap);
    }
    let mut n_pass = n;
    while n_fail > 0 && n_pass - n_fail > 1 {
        let mid = n_fail + (n_pass - n_fail) / 2;
        if eval(mid, &mut evaluations)? {
            n_pass = mid;
        } else {
            n_fail = mid;
        }
    }
    let mut monotone_violation = false;
    if cfg.check_monotone {
        let check = n_pass.saturating_mul(2);
        if check <= cfg.n_hi_cap && !eval(check, &mut evaluations)? {
            monotone_violation = true;
        }
    }
    Ok(NSearchResult {
        status: SearchStatus::Found,
        n_min: Some(n_pass),
        bracket: (n_fail, n_pass),
        trials_per_point: cfg.trials,
        decision_rule,
        evaluations,
        monotone_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Eps,
    D,
    P,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Eps => "eps",
            Axis::D => "d",
            Axis::P => "p",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Axis::Eps, Axis::D, Axis::P].into_iter().find(|a| a.name() == s)
    }

    /// Fit abscissa of a grid value: `1/eps` on the eps axis, the value otherwise.
    pub fn abscissa(self, value: f64) -> f64 {
        match self {
            Axis::Eps => 1.0 / value,
            Axis::D | Axis::P => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub axis: Axis,
    /// `(abscissa, n_min)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `ln y` on `ln x`.
pub fn fit_power_law(axis: Axis, points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(invalid("points", format!("need at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid("points", "log-log fit needs positive coordinates"));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "abscissae must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(ScalingFit {
        axis,
        points: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub value: f64,
    pub search: NSearchResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub axis: Axis,
    pub points: Vec<ScalingPoint>,
    /// Grid values whose search hit the cap; excluded from the fit.
    pub excluded: Vec<f64>,
    /// `None` when fewer than 3 points were found.
    pub fit: Option<ScalingFit>,
}

/// Runs [`find_min_n`] at each grid value and fits `n_min` against the axis
/// abscissa in log-log scale.
pub fn scaling_run<T, F>(axis: Axis, grid: &[f64], make_runner: F, cfg: &SearchConfig) -> Result<ScalingResult>
where
    T: TrialRunner,
    F: Fn(usize, f64) -> Result<T>,
{
    if grid.len() < 3 {
        return Err(invalid("grid", "need at least 3 grid points"));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut excluded = Vec::new();
    let mut fit_points = Vec::new();
    for (i, &v) in grid.iter().enumerate() {
        let runner = make_runner(i, v)?;
        let search = find_min_n(&runner, cfg)?;
        match search.n_min {
            Some(n) => fit_points.push((axis.abscissa(v), n as f64)),
            None => excluded.push(v),
        }
        points.push(ScalingPoint { value: v, search });
    }
    let fit = if fit_points.len() >= 3 {
        Some(fit_power_law(axis, &fit_points)?)
    } else {
        None
    };
    Ok(ScalingResult {
        axis,
        points,
        excluded,
        fit,
    })
}

/// [`scaling_run`] for a [`TrialSpec`]: the grid value replaces eps, d or p;
/// the grid index feeds the trial seeds.
pub fn scaling_run_spec(axis: Axis, grid: &[f64], base: &TrialSpec, cfg: &SearchConfig) -> Result<ScalingResult> {
    scaling_run(axis, grid, |i, v| ExperimentRunner::new(spec_at(axis, base, i, v)?), cfg)
}

/// Copy of `base` at grid value `v`.
pub fn spec_at(axis: Axis, base: &TrialSpec, index: usize, v: f64) -> Result<TrialSpec> {
    let mut s = base.clone();
    s.grid_index = index as u64;
    match axis {
        Axis::Eps => s.eps = v,
        Axis::D => {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(invalid("grid", format!("{v} is not a dimension")));
            }
            s.problem = s.problem.with_d(v as usize);
        }
        Axis::P => s.problem = s.problem.with_p(v)?,
    }
    Ok(s)
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub run_id: String,
    pub problem: String,
    pub method: String,
    pub p: f64,
    pub d: usize,
    pub gamma: f64,
    pub eps: f64,
    pub sigma: f64,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub gap_mean: f64,
    pub gap_q90: f64,
    pub samples_used_mean: f64,
    pub seed: u64,
}

impl CsvRow {
    pub fn new(run_id: impl Into<String>, spec: &TrialSpec, est: &SuccessEstimate) -> Self {
        Self {
            run_id: run_id.into(),
            problem: spec.problem.name().to_string(),
            method: spec.method.name().to_string(),
            p: spec.problem.p(),
            d: spec.problem.d(),
            gamma: spec.problem.gamma(),
            eps: spec.eps,
            sigma: spec.sigma,
            n: est.n,
            trials: est.trials,
            successes: est.successes,
            p_hat: est.p_hat,
            ci_low: est.ci_low,
            ci_high: est.ci_high,
            gap_mean: est.gap_mean,
            gap_q90: est.gap_q90,
            samples_used_mean: est.samples_used_mean,
            seed: spec.master_seed,
        }
    }
}

fn csv_error(e: impl fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Serializes rows under [`CSV_HEADER`]; an empty slice gives a header-only file.
pub fn write_csv<W: std::io::Write>(rows: &[CsvRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}

pub fn emit_csv(rows: &[CsvRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(rows, std::io::BufWriter::new(f))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Io(format!("unexpected CSV header `{}`", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}
