//! End-to-end acceptance checks. Runs without the libtest harness so that the
//! per-criterion summary lines are always printed.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use common::{fd_grad, fw_gap, gaussian, inside, rel_err, rng, sub};
use rand::Rng;
use sasaa::harness::{
    estimate_success, scaling_run_spec, Axis, ExperimentRunner, Method, ProblemSpec, ScalingResult, SearchConfig,
    TrialSpec,
};
use sasaa::pgeom::{kappa_p, norm, project, PBall, ProxSetup};
use sasaa::problems::{
    AbsRegression, GaussPower, SaddleProblem, SharpSaddle, StochasticProblem, StronglyConvexQuad,
};
use sasaa::theory::{
    n_growth, n_offline_convex, n_offline_sc, n_online_convex, n_online_sc, n_saddle, Prediction, RegimeSpec,
};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn search_cfg() -> SearchConfig {
    SearchConfig::new(0.2, 200)
}

fn n_mins(r: &ScalingResult) -> Vec<Option<usize>> {
    r.points.iter().map(|p| p.search.n_min).collect()
}

fn slope_in(r: &ScalingResult, lo: f64, hi: f64) -> Check {
    match &r.fit {
        Some(f) => ensure(
            f.slope >= lo && f.slope <= hi,
            format!("slope {:.3} in [{lo}, {hi}], n_min {:?}", f.slope, n_mins(r)),
        ),
        None => Err(format!("too few points found, n_min {:?}", n_mins(r))),
    }
}

fn projection_oracle() -> Check {
    let mut r = rng(101);
    let ps = [1.0, 1.3, 2.0, 3.0, f64::INFINITY];
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let p = ps[k % ps.len()];
        let d = r.random_range(1..=4);
        let ball = PBall::new(p, r.random_range(0.2..2.0), d).unwrap();
        let x = gaussian(&mut r, d, 2.0);
        let y = project(&x, &ball).unwrap();
        if norm(&y, p).unwrap() > ball.radius * (1.0 + 1e-9) {
            return Err(format!("infeasible projection at p={p}, d={d}"));
        }
        // Frank-Wolfe gap bounds the excess of |y - x|^2 over the constrained minimum
        let g: Vec<f64> = sub(&y, &x).iter().map(|v| 2.0 * v).collect();
        worst = worst.max(fw_gap(&g, &y, &ball));
    }
    ensure(worst <= 1e-6, format!("max objective excess {worst:.2e} over 1000 instances"))
}

fn prox_sandwich() -> Check {
    let mut r = rng(102);
    let e2 = std::f64::consts::E.powi(2);
    let mut checked = 0;
    for &d in &[2, 10, 100] {
        for &p in &[1.0, 1.3, 2.0] {
            let prox = ProxSetup::new(p, d).unwrap();
            let kappa = kappa_p(p, d).unwrap();
            for _ in 0..1112 {
                let x = gaussian(&mut r, d, 1.0);
                let z = gaussian(&mut r, d, 1.0);
                let v = prox.prox_value(&x, &z).unwrap();
                let n2 = norm(&sub(&x, &z), p).unwrap().powi(2);
                if v < 0.5 * n2 * (1.0 - 1e-12) || v > kappa * e2 * n2 * (1.0 + 1e-12) {
                    return Err(format!("violated at p={p}, d={d}: V={v}, |x-z|^2={n2}"));
                }
                checked += 1;
            }
        }
    }
    ensure(checked >= 10_000, format!("{checked} pairs"))
}

fn worst_fd<P: StochasticProblem>(p: &P, seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = p.meta().domain.dim;
    let mut g = vec![0.0; d];
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = inside(&mut r, &p.meta().domain);
        let xi = p.sample(&mut r);
        p.subgrad(&x, &xi, &mut g);
        worst = worst.max(rel_err(&g, &fd_grad(|v| p.loss(v, &xi), &x, 1e-6)));
    }
    worst
}

fn gradient_checks() -> Check {
    let mut worst = 0.0f64;
    worst = worst.max(worst_fd(&GaussPower::new(6, 1.5, 0.3).unwrap(), 1));
    worst = worst.max(worst_fd(&GaussPower::new(6, 2.0, 0.3).unwrap(), 2));
    worst = worst.max(worst_fd(&StronglyConvexQuad::new(6, 1.3, 0.5).unwrap(), 3));
    worst = worst.max(worst_fd(&AbsRegression::new(6, 3, 0.2, 1.0, 2.0).unwrap(), 4));
    worst = worst.max(worst_fd(&AbsRegression::new(6, 3, 0.2, 1.0, 1.0).unwrap(), 5));
    let s = SharpSaddle::new(4, 3, 1.0, 0.7, 0.3).unwrap();
    let mut r = rng(6);
    let (mut gx, mut gy) = (vec![0.0; 4], vec![0.0; 3]);
    for _ in 0..100 {
        let x = inside(&mut r, &s.meta_x().domain);
        let y = inside(&mut r, &s.meta_y().domain);
        let xi = s.sample(&mut r);
        s.subgrad_x(&x, &y, &xi, &mut gx);
        s.supergrad_y(&x, &y, &xi, &mut gy);
        worst = worst.max(rel_err(&gx, &fd_grad(|v| s.loss(v, &y, &xi), &x, 1e-6)));
        worst = worst.max(rel_err(&gy, &fd_grad(|v| s.loss(&x, v, &xi), &y, 1e-6)));
    }
    ensure(worst <= 1e-5, format!("max relative error {worst:.2e}"))
}

const EPS_GRID: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

fn convex_eps_scaling() -> Check {
    let problem = ProblemSpec::AbsReg {
        d: 10,
        n_dir: 3,
        noise: 5.0,
        radius: 80.0,
        p: 2.0,
    };
    let base = TrialSpec::new(problem, Method::SaMd, 0, 0.4, 0.2);
    let r = scaling_run_spec(Axis::Eps, &EPS_GRID, &base, &search_cfg()).unwrap();
    slope_in(&r, 1.5, 2.5)
}

fn strongly_convex_eps_scaling() -> Check {
    let problem = ProblemSpec::ScQuad {
        d: 5,
        modulus: 1.0,
        noise: 1.0,
        radius: 4.0,
    };
    let mut runs = Vec::new();
    let mut notes = Vec::new();
    for method in [Method::SaRestart, Method::SaaSc] {
        let base = TrialSpec::new(problem.clone(), method, 0, 0.4, 0.2);
        let r = scaling_run_spec(Axis::Eps, &EPS_GRID, &base, &search_cfg()).unwrap();
        let s = slope_in(&r, 0.6, 1.4);
        notes.push(format!("{method}: {}", s.as_ref().unwrap_or_else(|e| e)));
        s?;
        runs.push(n_mins(&r));
    }
    let mut worst = 1.0f64;
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        let (a, b) = (a.unwrap() as f64, b.unwrap() as f64);
        worst = worst.max(a / b).max(b / a);
    }
    notes.push(format!("max curve ratio {worst:.2}"));
    ensure(worst <= 20.0, notes.join("; "))
}

fn sharp_eps_independence() -> Check {
    let problem = ProblemSpec::GaussPower {
        d: 5,
        gamma: 1.0,
        noise: 1.0,
    };
    let base = TrialSpec::new(problem, Method::Saa, 0, 0.2, 0.2);
    let r = scaling_run_spec(Axis::Eps, &[0.2, 0.1, 0.05, 0.025], &base, &search_cfg()).unwrap();
    slope_in(&r, -0.3, 0.4)
}

fn dimension_floor() -> Check {
    let problem = ProblemSpec::GaussPower {
        d: 2,
        gamma: 2.0,
        noise: 1.0,
    };
    let base = TrialSpec::new(problem, Method::Saa, 0, 0.2, 0.2);
    let r = scaling_run_spec(Axis::D, &[2.0, 5.0, 10.0, 20.0, 50.0], &base, &search_cfg()).unwrap();
    slope_in(&r, 0.5, f64::INFINITY)
}

fn regularization_path() -> Check {
    let (eps, sigma, radius) = (0.2, 0.2, 4.0);
    let mut notes = Vec::new();
    let mut ok = true;
    for d in [10, 50] {
        let problem = ProblemSpec::AbsReg {
            d,
            n_dir: 4,
            noise: 0.1,
            radius,
            p: 1.0,
        };
        let m = AbsRegression::new(d, 4, 0.1, radius, 1.0).unwrap().meta().lipschitz;
        let spec = RegimeSpec {
            m,
            r: radius,
            d,
            p: 1.0,
            eps,
            sigma,
            delta: eps / 2.0,
            ..RegimeSpec::default()
        };
        let online = n_online_convex(&spec).unwrap().n;
        let offline = n_offline_convex(&spec).unwrap().n;
        let mut trial = TrialSpec::new(problem, Method::Saa, online as usize, eps, sigma);
        trial.regularize = true;
        let est = estimate_success(&ExperimentRunner::new(trial).unwrap(), online as usize, 200, true).unwrap();
        let ratio = offline as f64 / online as f64;
        ok &= est.p_hat >= 1.0 - sigma && ratio >= d as f64 / 10.0;
        notes.push(format!(
            "d={d}: success {:.3} at N={online} (const_mult 1), predicted offline/online {ratio:.1}",
            est.p_hat
        ));
    }
    ensure(ok, notes.join("; "))
}

fn saddle_certification() -> Check {
    let s = SharpSaddle::new(5, 5, 1.0, 1.0, 0.1).unwrap();
    let block = |m: &sasaa::problems::OracleMeta, eps: f64| RegimeSpec {
        m: m.lipschitz,
        lambda: m.lambda.unwrap(),
        gamma: 1.0,
        mu_gamma: m.growth.unwrap().mu_gamma,
        d: m.domain.dim,
        eps,
        sigma: 0.2,
        ..RegimeSpec::default()
    };
    let n = n_saddle(&block(s.meta_x(), 0.2), &block(s.meta_y(), 0.2)).unwrap().n as usize;
    let problem = ProblemSpec::SharpSaddle {
        dx: 5,
        dy: 5,
        mu_x: 1.0,
        mu_y: 1.0,
        noise: 0.1,
    };
    let base = TrialSpec::new(problem, Method::SaaSaddle, n, 0.2, 0.2);
    let est = estimate_success(&ExperimentRunner::new(base.clone()).unwrap(), n, 200, true).unwrap();
    let r = scaling_run_spec(Axis::Eps, &[0.2, 0.1, 0.05], &base, &search_cfg()).unwrap();
    let slope = slope_in(&r, -0.3, 0.4);
    let detail = format!(
        "success {:.3} at N={n} (const_mult 1); {}",
        est.p_hat,
        slope.as_ref().unwrap_or_else(|e| e)
    );
    ensure(est.p_hat >= 0.8 && slope.is_ok(), detail)
}

fn theory_values() -> Check {
    let b = RegimeSpec::default();
    let n = |p: sasaa::Result<Prediction>| p.unwrap().n;
    let got = [
        n(n_online_convex(&RegimeSpec { d: 1_000_000, ..b.clone() })),
        n(n_online_convex(&RegimeSpec { p: f64::INFINITY, d: 4, ..b.clone() })),
        n(n_offline_convex(&RegimeSpec { delta: 0.05, d: 10, ..b.clone() })),
        n(n_online_sc(&RegimeSpec { eps: 0.01, ..b.clone() })),
        n(n_offline_sc(&RegimeSpec { eps: 0.01, sigma: 0.05, ..b.clone() })),
        n(n_growth(&RegimeSpec { d: 10, ..b.clone() })),
    ];
    // hand evaluation with every constant equal to 1
    let ln10 = 10f64.ln();
    let expect = [
        (100.0 * ln10).ceil() as u64,
        (400.0 * ln10).ceil() as u64,
        (400.0 * (10.0 * 20f64.ln() + ln10)).ceil() as u64,
        (100.0 * (100f64.ln() / 0.1).ln()).ceil() as u64,
        (100.0 * (100f64.ln() + 20f64.ln().ln()) * 20f64.ln()).ceil() as u64,
        (10.0 * 4f64.ln() + ln10).ceil() as u64,
    ];
    if got != expect {
        return Err(format!("values {got:?} != hand values {expect:?}"));
    }
    let preds: [fn(&RegimeSpec) -> sasaa::Result<Prediction>; 5] =
        [n_online_convex, n_offline_convex, n_online_sc, n_offline_sc, n_growth];
    let mut cells = 0;
    for &d in &[1usize, 10, 100, 1000] {
        for &p in &[1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            for &eps in &[0.02, 0.05, 0.1, 0.3] {
                for &m in &[0.5, 1.0, 3.0] {
                    let s = RegimeSpec { d, p, eps, m, lambda: m, r: 1.5, delta: eps / 3.0, ..b.clone() };
                    let bumps = [
                        RegimeSpec { eps: eps * 1.3, delta: eps * 1.3 / 3.0, ..s.clone() },
                        RegimeSpec { sigma: s.sigma * 1.5, ..s.clone() },
                    ];
                    let grows = [
                        RegimeSpec { m: m * 1.3, lambda: m * 1.3, ..s.clone() },
                        RegimeSpec { r: 2.0, ..s.clone() },
                        RegimeSpec { d: d * 2, ..s.clone() },
                    ];
                    let mut all: Vec<fn(&RegimeSpec) -> sasaa::Result<Prediction>> = preds.to_vec();
                    all.push(|x| n_saddle(x, x));
                    for f in all {
                        let base = f(&s).unwrap().n;
                        for t in &bumps {
                            if f(t).unwrap().n > base {
                                return Err(format!("not nonincreasing at {s:?}"));
                            }
                        }
                        for t in &grows {
                            if f(t).unwrap().n < base {
                                return Err(format!("not nondecreasing at {s:?}"));
                            }
                        }
                        cells += 1;
                    }
                }
            }
        }
    }
    Ok(format!("6 hand values match; {cells} monotonicity cells"))
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases: [&[&str]; 3] = [
        &["estimate-n", "--problem", "gauss-power", "--method", "sa-md", "--eps", "0.1"],
        &["scaling", "--problem", "sc-quad", "--noise", "1", "--method", "saa", "--grid", "0.4,0.2,0.1"],
        &["saddle", "--problem", "sharp-saddle", "--method", "saa-saddle", "--eps", "0.2"],
    ];
    for (i, case) in cases.iter().enumerate() {
        let run = |tag: &str| -> Result<Vec<u8>, String> {
            let path = dir.path().join(format!("{i}-{tag}.csv"));
            let out = Command::new(env!("CARGO_BIN_EXE_sasaa"))
                .args(*case)
                .args(["--seed", "42", "--trials", "30", "--sigma", "0.2", "--out"])
                .arg(&path)
                .output()
                .map_err(|e| e.to_string())?;
            if !out.status.success() {
                return Err(String::from_utf8_lossy(&out.stderr).into_owned());
            }
            std::fs::read(&path).map_err(|e| e.to_string())
        };
        let first = run("a")?;
        if first.is_empty() || first != run("b")? {
            return Err(format!("`{}` output differs between runs", case[0]));
        }
    }
    Ok("estimate-n, scaling and saddle CSV byte-identical across runs".into())
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Check); 11] = [
        (1, "projection matches constrained-minimization oracle", projection_oracle),
        (2, "prox sandwich", prox_sandwich),
        (3, "gradient checks", gradient_checks),
        (4, "convex eps scaling", convex_eps_scaling),
        (5, "strongly convex eps scaling", strongly_convex_eps_scaling),
        (6, "sharp minimum eps independence", sharp_eps_independence),
        (7, "dimension scaling floor", dimension_floor),
        (8, "regularization path", regularization_path),
        (9, "saddle certification", saddle_certification),
        (10, "theory predictors", theory_values),
        (11, "CLI determinism", cli_determinism),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let res = check();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {id}: PASS {name} ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL {name} ({detail}) [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
