mod common;

use common::{dot, fd_grad, inside, rel_err, rng, sub};
use sasaa::pgeom::{norm, ProxSetup};
use sasaa::problems::{AbsRegression, GaussPower, StochasticProblem};
use sasaa::regularize::{mu_for_eps, regularize, transfer_guarantee};
use sasaa::saa::{saa_pipeline, SaaMethod};

#[test]
fn mu_examples() {
    for d in [1, 7, 1000] {
        assert!((mu_for_eps(0.1, 2.0, d, 1.0).unwrap() - 0.05).abs() < 1e-15);
    }
    let v = mu_for_eps(0.1, 1.0, 20, 1.0).unwrap();
    assert!((v - 0.1 / (2.0 * 2.0 * 20f64.ln())).abs() < 1e-15);
    assert!((v - 0.008_345_205_017_383_351).abs() < 1e-15);
    let a = mu_for_eps(0.2, 1.3, 40, 1.5).unwrap();
    let b = mu_for_eps(0.2, 1.3, 40, 3.0).unwrap();
    assert!((a / b - 4.0).abs() < 1e-12);
    assert!(mu_for_eps(0.0, 2.0, 3, 1.0).is_err());
}

#[test]
fn transfer_examples() {
    let eps = 0.2;
    assert!(transfer_guarantee(eps, eps / 2.0, 1.0, eps / 2.0));
    for mu in [0.0, 1e-6, 1.0, 1e6] {
        assert!(!transfer_guarantee(eps, eps, mu, 0.0));
        // V_star = 0 makes every weight admissible
        assert!(transfer_guarantee(eps, 0.09, mu, 0.0));
        assert!(!transfer_guarantee(eps, 0.11, mu, 0.0));
    }
}

#[test]
fn tiny_weight_and_center_leave_the_loss_unchanged() {
    let p = AbsRegression::new(6, 2, 0.1, 1.0, 1.0).unwrap();
    let prox = ProxSetup::new(1.0, 6).unwrap();
    let center = vec![0.1, 0.0, -0.1, 0.05, 0.0, 0.0];
    let tiny = regularize(&p, 1e-15, center.clone(), prox).unwrap();
    let reg = regularize(&p, 3.0, center.clone(), prox).unwrap();
    let mut r = rng(1);
    for _ in 0..100 {
        let x = inside(&mut r, &p.meta().domain);
        let xi = p.sample(&mut r);
        assert!((tiny.loss(&x, &xi) - p.loss(&x, &xi)).abs() <= 1e-12);
        assert_eq!(reg.loss(&center, &xi), p.loss(&center, &xi));
    }
}

#[test]
fn regularized_gradients_match_finite_differences() {
    let mut r = rng(2);
    for p_exp in [1.0, 1.5, 2.0] {
        let p = AbsRegression::new(5, 2, 0.2, 1.0, p_exp).unwrap();
        let prox = ProxSetup::new(p_exp, 5).unwrap();
        let reg = regularize(&p, 0.7, vec![0.0; 5], prox).unwrap();
        let mut g = vec![0.0; 5];
        for _ in 0..100 {
            let x = inside(&mut r, &p.meta().domain);
            let xi = reg.sample(&mut r);
            reg.subgrad(&x, &xi, &mut g);
            let fd = fd_grad(|v| reg.loss(v, &xi), &x, 1e-6);
            assert!(rel_err(&g, &fd) <= 1e-5);
        }
    }
}

#[test]
fn regularized_losses_are_strongly_convex_and_nonnegative() {
    let mut r = rng(3);
    for p_exp in [1.0, 1.3, 2.0] {
        let p = AbsRegression::new(8, 3, 0.2, 1.0, p_exp).unwrap();
        let prox = ProxSetup::new(p_exp, 8).unwrap();
        let mu = 0.5;
        let reg = regularize(&p, mu, vec![0.0; 8], prox).unwrap();
        let mut g = vec![0.0; 8];
        for _ in 0..10_000 {
            let x = inside(&mut r, &p.meta().domain);
            let y = inside(&mut r, &p.meta().domain);
            let xi = reg.sample(&mut r);
            reg.subgrad(&x, &xi, &mut g);
            let d = sub(&y, &x);
            let n = norm(&d, p_exp).unwrap();
            let rhs = reg.loss(&x, &xi) + dot(&g, &d) + 0.5 * mu * n * n;
            assert!(reg.loss(&y, &xi) >= rhs - 1e-9);
            assert!(reg.loss(&y, &xi) >= 0.0);
        }
    }
}

#[test]
fn regularization_preconditions() {
    let p = GaussPower::new(4, 1.0, 0.1).unwrap();
    let prox = ProxSetup::new(2.0, 4).unwrap();
    assert!(regularize(&p, -1.0, vec![0.0; 4], prox).is_err());
    assert!(regularize(&p, 1.0, vec![0.0; 3], prox).is_err());
    assert!(regularize(&p, 1.0, vec![2.0, 0.0, 0.0, 0.0], prox).is_err());
    assert!(regularize(&p, 1.0, vec![0.0; 4], ProxSetup::new(1.0, 4).unwrap()).is_err());
    let wide = AbsRegression::new(4, 2, 0.1, 1.0, 3.0).unwrap();
    assert!(regularize(&wide, 1.0, vec![0.0; 4], ProxSetup::euclidean(4)).is_err());
}

#[test]
fn l1_regularized_saa_transfers_to_the_original_problem() {
    let eps = 0.2;
    for d in [10, 30] {
        let p = AbsRegression::new(d, 4, 0.1, 2.0, 1.0).unwrap();
        let prox = ProxSetup::new(1.0, d).unwrap();
        let mu = mu_for_eps(eps, 1.0, d, 2.0).unwrap();
        let zero = vec![0.0; d];
        let reg = regularize(&p, mu, zero.clone(), prox).unwrap();
        let (_, reg_star) = reg.true_opt().unwrap();
        let x_near = p.nearest_solution(&zero, &prox).unwrap();
        let v_star = prox.prox_value(&x_near, &zero).unwrap();
        assert!(mu * v_star <= eps / 2.0);
        let f_star = p.true_opt().unwrap().1;
        let mut checked = 0;
        for t in 0..40 {
            let res = saa_pipeline(&reg, 40, SaaMethod::Plain { delta: eps / 4.0 }, &prox, &mut rng(t)).unwrap();
            let reg_gap = reg.true_value(&res.point) - reg_star;
            assert!(reg_gap >= -1e-12);
            if transfer_guarantee(eps, reg_gap, mu, v_star) {
                checked += 1;
                assert!(p.true_value(&res.point) - f_star <= eps);
            }
        }
        assert!(checked >= 30, "{checked}");
    }
}
