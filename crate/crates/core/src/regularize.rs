//! Regularization `f(x, xi) + mu V(x, x0)`: turns a convex problem into a
//! `mu`-strongly convex one whose `eps/2`-solutions are `eps`-solutions of the
//! original when `mu V(x*, x0) <= eps/2`.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::pgeom::{kappa_p, lp_norm, ProxSetup};
use crate::problems::{Growth, OracleMeta, StochasticProblem};

/// `inner + mu V(., center)`.
#[derive(Debug, Clone)]
pub struct RegularizedProblem<'a, P: StochasticProblem> {
    inner: &'a P,
    mu: f64,
    center: Vec<f64>,
    prox: ProxSetup,
    meta: OracleMeta,
}

/// Wraps `problem`; `center` must be feasible and `prox` must match the
/// domain exponent, which must lie in `[1, 2]`.
pub fn regularize<'a, P: StochasticProblem>(
    problem: &'a P,
    mu: f64,
    center: Vec<f64>,
    prox: ProxSetup,
) -> Result<RegularizedProblem<'a, P>> {
    let inner_meta = problem.meta();
    let ball = &inner_meta.domain;
    if ball.p > 2.0 {
        return Err(Error::ProxExponent(ball.p));
    }
    if prox.p != ball.p {
        return Err(invalid(
            "prox",
            format!("prox exponent {} does not match domain exponent {}", prox.p, ball.p),
        ));
    }
    if prox.dim != ball.dim || center.len() != ball.dim {
        return Err(Error::DimensionMismatch {
            expected: ball.dim,
            got: if prox.dim != ball.dim { prox.dim } else { center.len() },
        });
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("{mu} must be nonnegative and finite")));
    }
    if !ball.contains(&center) {
        return Err(invalid("center", "center must lie in the domain"));
    }
    let reach = ball.radius + lp_norm(&center, ball.p);
    let meta = OracleMeta {
        lipschitz: inner_meta.lipschitz + mu * prox.beta() * reach,
        mu: inner_meta.mu + mu,
        growth: (mu > 0.0).then_some(Growth {
            gamma: 2.0,
            mu_gamma: 0.5 * (inner_meta.mu + mu),
        }),
        lambda: inner_meta.lambda,
        domain: *ball,
    };
    Ok(RegularizedProblem {
        inner: problem,
        mu,
        center,
        prox,
        meta,
    })
}

impl<P: StochasticProblem> RegularizedProblem<'_, P> {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn prox(&self) -> &ProxSetup {
        &self.prox
    }

    pub fn inner(&self) -> &P {
        self.inner
    }

    /// `mu V(x, center)`.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        self.mu * self.prox.psi(&u)
    }

    fn add_penalty_grad(&self, x: &[f64], out: &mut [f64]) {
        let u: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let mut g = vec![0.0; u.len()];
        self.prox.psi_grad(&u, &mut g);
        for (o, gi) in out.iter_mut().zip(&g) {
            *o += self.mu * gi;
        }
    }
}

impl<P: StochasticProblem> StochasticProblem for RegularizedProblem<'_, P> {
    type Xi = P::Xi;
    type Stat = P::Stat;

    fn meta(&self) -> &OracleMeta {
        &self.meta
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> P::Xi {
        self.inner.sample(rng)
    }

    fn loss(&self, x: &[f64], xi: &P::Xi) -> f64 {
        self.inner.loss(x, xi) + self.penalty(x)
    }

    fn subgrad(&self, x: &[f64], xi: &P::Xi, out: &mut [f64]) {
        self.inner.subgrad(x, xi, out);
        self.add_penalty_grad(x, out);
    }

    fn lipschitz_at(&self, xi: &P::Xi) -> f64 {
        let reach = self.meta.domain.radius + lp_norm(&self.center, self.meta.domain.p);
        self.inner.lipschitz_at(xi) + self.mu * self.prox.beta() * reach
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        self.inner.true_value(x) + self.penalty(x)
    }

    fn true_opt(&self) -> Option<(Vec<f64>, f64)> {
        self.inner.regularized_opt(self.mu, &self.center, &self.prox)
    }

    fn summarize(&self, sample: &[P::Xi]) -> P::Stat {
        self.inner.summarize(sample)
    }

    fn stat_loss(&self, stat: &P::Stat, x: &[f64]) -> f64 {
        self.inner.stat_loss(stat, x) + self.penalty(x)
    }

    fn stat_subgrad(&self, stat: &P::Stat, x: &[f64], out: &mut [f64]) {
        self.inner.stat_subgrad(stat, x, out);
        self.add_penalty_grad(x, out);
    }
}

/// Largest admissible regularization weight `eps / (2 kappa_p(d) R^2)`.
pub fn mu_for_eps(eps: f64, p: f64, d: usize, radius: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("eps", format!("{eps} must be positive")));
    }
    if !(radius > 0.0) {
        return Err(invalid("radius", format!("{radius} must be positive")));
    }
    Ok(eps / (2.0 * kappa_p(p, d)? * radius * radius))
}

/// Whether an `eps/2` regularized solve transfers: `gap <= eps/2` and
/// `mu V(x*, x0) <= eps/2`.
pub fn transfer_guarantee(eps: f64, reg_gap: f64, mu: f64, v_star: f64) -> bool {
    let half = 0.5 * eps;
    reg_gap <= half && mu * v_star <= half
}
