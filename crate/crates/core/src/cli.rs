//! Command-line front end.
//!
//! A `--config` file holds `key=value` lines using the long flag names;
//! values given on the command line win over the file.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    emit_csv, estimate_success, find_min_n, scaling_run_spec, Axis, CsvRow, ExperimentRunner, Method,
    ProblemSpec, SearchConfig, SearchStatus, TrialRunner, TrialSpec,
};
use crate::problems::SaddleProblem;
use crate::theory::{n_saddle, predict, Regime, RegimeSpec};

#[derive(Debug, Parser)]
#[command(name = "sasaa", version, about = "Online vs offline stochastic optimization experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a single trial and report the optimality gap.
    Solve(CommonArgs),
    /// Search the smallest N whose success rate reaches 1 - sigma.
    EstimateN(CommonArgs),
    /// Search minimal N over a grid of eps, d or p and fit a power law.
    Scaling(ScalingArgs),
    /// Print a closed-form sample size prediction.
    Theory(TheoryArgs),
    /// Estimate the success rate of a saddle solver.
    Saddle(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// gauss-power, sc-quad, abs-reg or sharp-saddle (default gauss-power,
    /// sharp-saddle for the saddle command).
    #[arg(long)]
    pub problem: Option<String>,
    /// sa-sgd, sa-md, sa-restart, saa, saa-sc, saa-saddle or sa-saddle.
    #[arg(long)]
    pub method: Option<String>,
    /// Domain exponent (abs-reg only).
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Multiplier on theory predictions.
    #[arg(long, default_value_t = 1.0)]
    pub const_mult: f64,
    /// Solve the problem regularized by mu V(x, 0).
    #[arg(long)]
    pub regularize: bool,
    /// Regularization weight (default eps / (2 kappa R^2)).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Growth exponent of gauss-power.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Noise scale s.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Strong convexity modulus of sc-quad.
    #[arg(long, default_value_t = 1.0)]
    pub modulus: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Number of active directions of abs-reg.
    #[arg(long, default_value_t = 1)]
    pub n_dir: usize,
    #[arg(long)]
    pub dx: Option<usize>,
    #[arg(long)]
    pub dy: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub mu_x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu_y: f64,
    /// Sample size for solve and saddle (saddle defaults to the theory prediction).
    #[arg(long)]
    pub n: Option<usize>,
    /// Empirical solve accuracy for saa (default eps/2).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Start radius for saddle methods.
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    #[arg(long, default_value_t = 1)]
    pub n_lo: usize,
    #[arg(long, default_value_t = 1 << 20)]
    pub n_cap: usize,
    /// Run trials on one thread.
    #[arg(long)]
    pub serial: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScalingArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// eps, d or p.
    #[arg(long, default_value = "eps")]
    pub axis: String,
    /// Comma-separated grid values.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    /// convex-online, convex-offline, sc-online, sc-offline, growth-offline or saddle-offline.
    #[arg(long)]
    pub regime: String,
    /// Comma-separated key=value constants (M, R, mu, lambda, gamma, mu_gamma, r_eps, d, p, eps, sigma, delta).
    #[arg(long, default_value = "")]
    pub params: String,
    #[arg(long, default_value_t = 1.0)]
    pub const_mult: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    NotFound,
}

impl CommonArgs {
    pub fn problem_spec(&self, default: &str) -> Result<ProblemSpec> {
        Ok(match self.problem.as_deref().unwrap_or(default) {
            "gauss-power" => ProblemSpec::GaussPower {
                d: self.d,
                gamma: self.gamma,
                noise: self.noise,
            },
            "sc-quad" => ProblemSpec::ScQuad {
                d: self.d,
                modulus: self.modulus,
                noise: self.noise,
                radius: self.radius,
            },
            "abs-reg" => ProblemSpec::AbsReg {
                d: self.d,
                n_dir: self.n_dir,
                noise: self.noise,
                radius: self.radius,
                p: self.p,
            },
            "sharp-saddle" => ProblemSpec::SharpSaddle {
                dx: self.dx.unwrap_or(self.d),
                dy: self.dy.unwrap_or(self.d),
                mu_x: self.mu_x,
                mu_y: self.mu_y,
                noise: self.noise,
            },
            other => return Err(Error::Config(format!("unknown problem `{other}`"))),
        })
    }

    pub fn method(&self, default: Method) -> Result<Method> {
        match &self.method {
            None => Ok(default),
            Some(m) => Method::parse(m).ok_or_else(|| Error::Config(format!("unknown method `{m}`"))),
        }
    }

    pub fn trial_spec(&self, default_problem: &str, default_method: Method) -> Result<TrialSpec> {
        let mut spec = TrialSpec::new(
            self.problem_spec(default_problem)?,
            self.method(default_method)?,
            self.n.unwrap_or(1000),
            self.eps,
            self.sigma,
        );
        spec.regularize = self.regularize;
        spec.mu = self.mu;
        spec.delta = self.delta;
        spec.start = self.start;
        spec.master_seed = self.seed;
        Ok(spec)
    }

    fn search_config(&self) -> SearchConfig {
        let mut cfg = SearchConfig::new(self.sigma, self.trials);
        cfg.n_lo = self.n_lo;
        cfg.n_hi_cap = self.n_cap;
        cfg.parallel = !self.serial;
        cfg
    }
}

fn write_rows(out: &Option<PathBuf>, rows: &[CsvRow]) -> Result<()> {
    match out {
        Some(path) => emit_csv(rows, path),
        None => Ok(()),
    }
}

fn cmd_solve(a: &CommonArgs) -> Result<Outcome> {
    let spec = a.trial_spec("gauss-power", Method::SaMd)?;
    let runner = ExperimentRunner::new(spec.clone())?;
    let outcome = runner.run(spec.n, 0)?;
    println!(
        "problem={} method={} n={} gap={:e} success={}",
        spec.problem.name(),
        spec.method,
        spec.n,
        outcome.gap,
        outcome.success
    );
    let est = crate::harness::summarize_outcomes(spec.n, &[outcome]);
    write_rows(&a.out, &[CsvRow::new("solve", &spec, &est)])?;
    Ok(Outcome::Ok)
}

fn cmd_estimate_n(a: &CommonArgs) -> Result<Outcome> {
    let spec = a.trial_spec("gauss-power", Method::SaMd)?;
    let runner = ExperimentRunner::new(spec.clone())?;
    let res = find_min_n(&runner, &a.search_config())?;
    let rows: Vec<CsvRow> = res
        .evaluations
        .iter()
        .enumerate()
        .map(|(i, e)| CsvRow::new(format!("search-{i}"), &spec, e))
        .collect();
    write_rows(&a.out, &rows)?;
    match res.n_min {
        Some(n) => println!(
            "n_min={n} bracket=({}, {}) trials={} monotone_violation={}",
            res.bracket.0, res.bracket.1, res.trials_per_point, res.monotone_violation
        ),
        None => println!("n_min not found below cap {}", a.n_cap),
    }
    println!("rule: {}", res.decision_rule);
    Ok(match res.status {
        SearchStatus::Found => Outcome::Ok,
        SearchStatus::NotFound => Outcome::NotFound,
    })
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid value `{t}`")))
        })
        .collect()
}

fn cmd_scaling(a: &ScalingArgs) -> Result<Outcome> {
    let axis = Axis::parse(&a.axis).ok_or_else(|| Error::Config(format!("unknown axis `{}`", a.axis)))?;
    let grid = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => match axis {
            Axis::Eps => vec![0.4, 0.2, 0.1, 0.05],
            Axis::D => vec![2.0, 5.0, 10.0, 20.0, 50.0],
            Axis::P => vec![1.0, 1.5, 2.0],
        },
    };
    let base = a.common.trial_spec("gauss-power", Method::SaMd)?;
    let res = scaling_run_spec(axis, &grid, &base, &a.common.search_config())?;
    let mut rows = Vec::new();
    for (i, pt) in res.points.iter().enumerate() {
        let spec = crate::harness::spec_at(axis, &base, i, pt.value)?;
        let est = pt.search.at_n_min().or(pt.search.evaluations.last());
        if let Some(est) = est {
            rows.push(CsvRow::new(format!("{}={}", axis.name(), pt.value), &spec, est));
        }
        match pt.search.n_min {
            Some(n) => println!("{}={} n_min={n}", axis.name(), pt.value),
            None => println!("{}={} n_min not found", axis.name(), pt.value),
        }
    }
    write_rows(&a.common.out, &rows)?;
    match &res.fit {
        Some(f) => println!(
            "slope={:.4} intercept={:.4} r_squared={:.4}",
            f.slope, f.intercept, f.r_squared
        ),
        None => println!("fewer than 3 points found; no fit"),
    }
    Ok(if 2 * res.excluded.len() > grid.len() {
        Outcome::NotFound
    } else {
        Outcome::Ok
    })
}

fn cmd_theory(a: &TheoryArgs) -> Result<Outcome> {
    let regime =
        Regime::parse(&a.regime).ok_or_else(|| Error::Config(format!("unknown regime `{}`", a.regime)))?;
    let mut spec = RegimeSpec {
        const_mult: a.const_mult,
        ..RegimeSpec::default()
    };
    for kv in a.params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{kv}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad value in `{kv}`")))?;
        spec.set(k.trim(), v)?;
    }
    let pred = predict(regime, &spec)?;
    println!("regime={regime} n={}", pred.n);
    for (name, v) in &pred.factors {
        println!("  {name} = {v}");
    }
    Ok(Outcome::Ok)
}

fn cmd_saddle(a: &CommonArgs) -> Result<Outcome> {
    let mut spec = a.trial_spec("sharp-saddle", Method::SaaSaddle)?;
    let runner = ExperimentRunner::new(spec.clone())?;
    let n = match a.n {
        Some(n) => n,
        None => {
            let crate::harness::BuiltProblem::Saddle(p) = runner.problem() else {
                return Err(Error::Config("saddle needs a saddle problem".into()));
            };
            let block = |m: &crate::problems::OracleMeta| {
                let g = m.growth.expect("sharp saddle has growth");
                RegimeSpec {
                    m: m.lipschitz,
                    r: m.domain.radius,
                    lambda: m.lambda.unwrap_or(m.lipschitz),
                    gamma: g.gamma,
                    mu_gamma: g.mu_gamma,
                    d: m.domain.dim,
                    p: m.domain.p,
                    eps: a.eps,
                    sigma: a.sigma,
                    const_mult: a.const_mult,
                    ..RegimeSpec::default()
                }
            };
            let pred = n_saddle(&block(p.meta_x()), &block(p.meta_y()))?;
            usize::try_from(pred.n).map_err(|_| Error::Config("predicted N overflows".into()))?
        }
    };
    spec.n = n;
    let est = estimate_success(&runner, n, a.trials, !a.serial)?;
    println!(
        "n={n} successes={}/{} p_hat={:.4} ci=({:.4}, {:.4}) gap_mean={:e}",
        est.successes, est.trials, est.p_hat, est.ci_low, est.ci_high, est.gap_mean
    );
    write_rows(&a.out, &[CsvRow::new("saddle", &spec, &est)])?;
    Ok(Outcome::Ok)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::EstimateN(a) => cmd_estimate_n(a),
        Command::Scaling(a) => cmd_scaling(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Saddle(a) => cmd_saddle(a),
    }
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn config_args(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", i + 1)))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if k == "config" {
            return Err(Error::Config("config files cannot include other config files".into()));
        }
        match v {
            "true" if k == "regularize" || k == "serial" => out.push(format!("--{k}").into()),
            "false" if k == "regularize" || k == "serial" => {}
            _ => {
                out.push(format!("--{k}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

fn find_config(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Splices the config file's flags in front of the command-line flags.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = find_config(&args) else {
        return Ok(args);
    };
    if args.len() < 2 {
        return Ok(args);
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let extra = config_args(&text)?;
    let mut out = Vec::with_capacity(args.len() + extra.len());
    out.push(args[0].clone());
    out.push(args[1].clone());
    out.extend(extra);
    out.extend(args[2..].iter().cloned());
    Ok(out)
}

/// Parses `argv`, runs the command and maps the result to an exit code:
/// 0 ok, 1 configuration or I/O error, 2 search cap reached.
pub fn cli_main<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotFound) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_become_flags() {
        let a = config_args("# comment\neps = 0.2\nn_dir=3\nregularize=true\nserial=false\n").unwrap();
        let s: Vec<String> = a.iter().map(|x| x.to_string_lossy().into_owned()).collect();
        assert_eq!(s, ["--eps", "0.2", "--n-dir", "3", "--regularize"]);
        assert!(config_args("eps").is_err());
    }

    #[test]
    fn flags_override_config_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "eps=0.3\nd=7\n").unwrap();
        let argv: Vec<OsString> = ["sasaa", "solve", "--config", path.to_str().unwrap(), "--eps", "0.05"]
            .iter()
            .map(OsString::from)
            .collect();
        let cli = Cli::try_parse_from(expand_args(argv).unwrap()).unwrap();
        let Command::Solve(a) = cli.command else {
            panic!("expected solve");
        };
        assert_eq!(a.eps, 0.05);
        assert_eq!(a.d, 7);
    }
}
