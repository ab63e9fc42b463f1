use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sasaa::harness::{
    clopper_pearson, estimate_success, find_min_n, fit_power_law, read_csv, run_trial, scaling_run, splitmix64,
    write_csv, Axis, CsvRow, ExperimentRunner, Method, ProblemSpec, SearchConfig, SearchStatus, TrialOutcome,
    TrialRunner, TrialSpec,
};

struct Fn_<F: Fn(usize, u64) -> bool + Sync>(F);

impl<F: Fn(usize, u64) -> bool + Sync> TrialRunner for Fn_<F> {
    fn run(&self, n: usize, trial: u64) -> sasaa::Result<TrialOutcome> {
        let success = (self.0)(n, trial);
        Ok(TrialOutcome {
            gap: if success { 0.0 } else { 1.0 },
            success,
            samples_used: n,
        })
    }
}

fn coin(n: usize, trial: u64) -> bool {
    ChaCha8Rng::seed_from_u64(splitmix64(trial ^ ((n as u64) << 32))).random::<bool>()
}

fn binom_tail_ge(k: usize, n: usize, p: f64) -> f64 {
    // P(X >= k), summed in log space
    let mut total = 0.0;
    for j in k..=n {
        let lc: f64 = (1..=n).map(|i| (i as f64).ln()).sum::<f64>()
            - (1..=j).map(|i| (i as f64).ln()).sum::<f64>()
            - (1..=n - j).map(|i| (i as f64).ln()).sum::<f64>();
        total += (lc + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp();
    }
    total
}

#[test]
fn clopper_pearson_matches_binomial_tails() {
    for (k, n) in [(1, 10), (5, 10), (9, 10), (37, 50), (180, 200)] {
        let (lo, hi) = clopper_pearson(k, n);
        assert!((binom_tail_ge(k, n, lo) - 0.025).abs() < 1e-9, "{k}/{n}");
        assert!((1.0 - binom_tail_ge(k + 1, n, hi) - 0.025).abs() < 1e-9, "{k}/{n}");
    }
    for n in [1, 7, 200] {
        let (lo, hi) = clopper_pearson(n, n);
        assert!((lo - 0.025f64.powf(1.0 / n as f64)).abs() < 1e-12);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(0, n);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(1.0 / n as f64))).abs() < 1e-12);
    }
}

#[test]
fn fair_coin_never_reaches_high_confidence() {
    let runner = Fn_(coin);
    let e = estimate_success(&runner, 10, 2000, true).unwrap();
    assert!(e.ci_low <= 0.5 && e.ci_high >= 0.5, "{e:?}");
    let mut cfg = SearchConfig::new(0.1, 200);
    cfg.n_hi_cap = 1024;
    let r = find_min_n(&runner, &cfg).unwrap();
    assert_eq!(r.status, SearchStatus::NotFound);
    assert_eq!(r.bracket, (1024, 1024));
    assert_eq!(r.evaluations.len(), 11);
}

#[test]
fn certain_success_and_single_trials() {
    let e = estimate_success(&Fn_(|_, _| true), 5, 30, false).unwrap();
    assert_eq!((e.successes, e.p_hat, e.ci_high), (30, 1.0, 1.0));
    assert_eq!(e.gap_mean, 0.0);
    let one = estimate_success(&Fn_(|_, _| false), 5, 1, false).unwrap();
    assert_eq!((one.trials, one.successes, one.ci_low), (1, 0, 0.0));
    assert!(estimate_success(&Fn_(|_, _| true), 5, 0, false).is_err());
}

#[test]
fn threshold_search_finds_the_exact_size() {
    let runner = Fn_(|n, _| n >= 137);
    let r = find_min_n(&runner, &SearchConfig::new(0.2, 10)).unwrap();
    assert_eq!(r.n_min, Some(137));
    assert_eq!(r.bracket, (136, 137));
    assert_eq!(r.at_n_min().unwrap().successes, 10);
    assert!(!r.monotone_violation);
    assert!(r.decision_rule.contains("0.8"));

    let mut cfg = SearchConfig::new(0.2, 10);
    cfg.n_lo = 300;
    let r = find_min_n(&runner, &cfg).unwrap();
    assert_eq!((r.n_min, r.bracket), (Some(300), (0, 300)));
}

#[test]
fn non_monotone_success_is_flagged() {
    let runner = Fn_(|n, _| (50..80).contains(&n));
    let r = find_min_n(&runner, &SearchConfig::new(0.1, 5)).unwrap();
    assert_eq!(r.n_min, Some(50));
    assert!(r.monotone_violation);
}

#[test]
fn search_rejects_bad_configs() {
    let runner = Fn_(|_, _| true);
    assert!(find_min_n(&runner, &SearchConfig::new(0.0, 5)).is_err());
    let mut cfg = SearchConfig::new(0.1, 5);
    cfg.n_lo = 0;
    assert!(find_min_n(&runner, &cfg).is_err());
}

fn gauss_spec(method: Method, n: usize) -> TrialSpec {
    let mut s = TrialSpec::new(
        ProblemSpec::GaussPower {
            d: 5,
            gamma: 1.5,
            noise: 0.5,
        },
        method,
        n,
        0.2,
        0.2,
    );
    s.master_seed = 99;
    s
}

#[test]
fn parallel_and_serial_estimates_agree() {
    for method in [Method::SaSgd, Method::SaMd, Method::Saa] {
        let runner = ExperimentRunner::new(gauss_spec(method, 0)).unwrap();
        let a = estimate_success(&runner, 40, 32, true).unwrap();
        let b = estimate_success(&runner, 40, 32, false).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn trials_are_deterministic_and_seeded_by_index() {
    let s = gauss_spec(Method::Saa, 25);
    assert_eq!(run_trial(&s, 3).unwrap(), run_trial(&s, 3).unwrap());
    assert_ne!(run_trial(&s, 3).unwrap().gap, run_trial(&s, 4).unwrap().gap);
    let mut other = s.clone();
    other.master_seed = 100;
    assert_ne!(run_trial(&s, 3).unwrap().gap, run_trial(&other, 3).unwrap().gap);
}

#[test]
fn noiseless_strongly_convex_trial_is_nearly_exact() {
    let problem = ProblemSpec::ScQuad {
        d: 4,
        modulus: 1.0,
        noise: 0.0,
        radius: 2.0,
    };
    let s = TrialSpec::new(problem, Method::SaRestart, 10_000_000, 1e-6, 0.1);
    let o = run_trial(&s, 0).unwrap();
    assert!(o.success && o.gap <= 1e-6, "{o:?}");
}

#[test]
fn sharp_restart_sample_size_barely_moves_with_eps() {
    let base = gauss_spec(Method::SaRestart, 0);
    let mut base = TrialSpec {
        problem: ProblemSpec::GaussPower {
            d: 5,
            gamma: 1.0,
            noise: 1.0,
        },
        ..base
    };
    let mut cfg = SearchConfig::new(0.2, 100);
    cfg.check_monotone = false;
    let mut found = Vec::new();
    for eps in [0.1, 0.025] {
        base.eps = eps;
        let r = find_min_n(&ExperimentRunner::new(base.clone()).unwrap(), &cfg).unwrap();
        found.push(r.n_min.unwrap() as f64);
    }
    assert!(found[1] / found[0] <= 2.0 && found[0] / found[1] <= 2.0, "{found:?}");
}

#[test]
fn invalid_trial_specs_are_rejected() {
    let saddle = ProblemSpec::SharpSaddle {
        dx: 2,
        dy: 2,
        mu_x: 1.0,
        mu_y: 1.0,
        noise: 0.1,
    };
    assert!(ExperimentRunner::new(TrialSpec::new(saddle.clone(), Method::Saa, 5, 0.1, 0.1)).is_err());
    assert!(ExperimentRunner::new(gauss_spec(Method::SaaSaddle, 5)).is_err());
    let mut reg = TrialSpec::new(saddle, Method::SaaSaddle, 5, 0.1, 0.1);
    reg.regularize = true;
    assert!(ExperimentRunner::new(reg).is_err());
    let mut bad = gauss_spec(Method::Saa, 5);
    bad.sigma = 1.0;
    assert!(ExperimentRunner::new(bad).is_err());
    assert_eq!(Method::parse("sa-md"), Some(Method::SaMd));
    assert_eq!(Method::parse("bogus"), None);
}

#[test]
fn power_law_fits_recover_synthetic_slopes() {
    let d_pts: Vec<(f64, f64)> = [2.0, 5.0, 10.0, 50.0].iter().map(|&d: &f64| (d, 7.0 * d)).collect();
    let f = fit_power_law(Axis::D, &d_pts).unwrap();
    assert!((f.slope - 1.0).abs() < 1e-12 && (f.intercept - 7f64.ln()).abs() < 1e-12);
    let flat: Vec<(f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&x| (x, 12.0)).collect();
    assert!(fit_power_law(Axis::P, &flat).unwrap().slope.abs() < 1e-12);
    assert!(fit_power_law(Axis::D, &d_pts[..1]).is_err());

    let runner_for = |_: usize, eps: f64| -> sasaa::Result<_> {
        let need = (1.0 / (eps * eps)).ceil() as usize;
        Ok(Fn_(move |n, _| n >= need))
    };
    let r = scaling_run(Axis::Eps, &[0.2, 0.1, 0.05, 0.025], runner_for, &SearchConfig::new(0.1, 3)).unwrap();
    let fit = r.fit.unwrap();
    assert!((fit.slope - 2.0).abs() < 0.01, "{}", fit.slope);
    assert!(r.excluded.is_empty());
}

#[test]
fn csv_round_trip() {
    let spec = gauss_spec(Method::Saa, 20);
    let runner = ExperimentRunner::new(spec.clone()).unwrap();
    let rows: Vec<CsvRow> = [10, 20]
        .iter()
        .map(|&n| CsvRow::new("run-a", &spec, &estimate_success(&runner, n, 8, false).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);

    let mut empty = Vec::new();
    write_csv(&[], &mut empty).unwrap();
    let text = String::from_utf8(empty.clone()).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("run_id,problem,method"));
    assert!(read_csv(empty.as_slice()).unwrap().is_empty());
    assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
}
