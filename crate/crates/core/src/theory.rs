//! Closed-form sample-size predictors. Every Landau constant is 1 and
//! `const_mult` scales the final value; results are rounded up and floored at 1.

use std::fmt;

use crate::error::{invalid, Result};
use crate::pgeom::kappa_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ConvexOnline,
    ConvexOffline,
    ScOnline,
    ScOffline,
    GrowthOffline,
    SaddleOffline,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::ConvexOnline,
        Regime::ConvexOffline,
        Regime::ScOnline,
        Regime::ScOffline,
        Regime::GrowthOffline,
        Regime::SaddleOffline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::ConvexOnline => "convex-online",
            Regime::ConvexOffline => "convex-offline",
            Regime::ScOnline => "sc-online",
            Regime::ScOffline => "sc-offline",
            Regime::GrowthOffline => "growth-offline",
            Regime::SaddleOffline => "saddle-offline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constants and targets of one prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSpec {
    pub m: f64,
    pub r: f64,
    pub mu: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub mu_gamma: f64,
    /// Radius in the log factor of the growth bound; defaults to `4 eps / mu_1`
    /// at `gamma = 1` and to `2 R` otherwise.
    pub r_eps: Option<f64>,
    pub d: usize,
    pub p: f64,
    pub eps: f64,
    pub sigma: f64,
    pub delta: f64,
    pub const_mult: f64,
}

impl Default for RegimeSpec {
    fn default() -> Self {
        Self {
            m: 1.0,
            r: 1.0,
            mu: 1.0,
            lambda: 1.0,
            gamma: 1.0,
            mu_gamma: 1.0,
            r_eps: None,
            d: 1,
            p: 2.0,
            eps: 0.1,
            sigma: 0.1,
            delta: 0.0,
            const_mult: 1.0,
        }
    }
}

impl RegimeSpec {
    /// Sets a field by its CLI key.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "M" | "m" => self.m = value,
            "R" | "r" => self.r = value,
            "mu" => self.mu = value,
            "lambda" => self.lambda = value,
            "gamma" => self.gamma = value,
            "mu_gamma" => self.mu_gamma = value,
            "r_eps" => self.r_eps = Some(value),
            "d" => {
                if !(value >= 0.0 && value.fract() == 0.0) {
                    return Err(invalid("d", format!("{value} is not a dimension")));
                }
                self.d = value as usize
            }
            "p" => self.p = value,
            "eps" => self.eps = value,
            "sigma" => self.sigma = value,
            "delta" => self.delta = value,
            "const_mult" => self.const_mult = value,
            _ => return Err(invalid("params", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn check(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("{v} must be positive and finite")))
            }
        };
        pos("M", self.m)?;
        pos("R", self.r)?;
        pos("eps", self.eps)?;
        pos("const_mult", self.const_mult)?;
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(invalid("sigma", format!("{} must lie in (0, 1)", self.sigma)));
        }
        if !(self.p >= 1.0) {
            return Err(invalid("p", format!("{} must be >= 1", self.p)));
        }
        Ok(())
    }
}

/// A predicted sample size with the intermediate factors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub n: u64,
    pub factors: Vec<(&'static str, f64)>,
}

impl Prediction {
    fn from_value(raw: f64, mut factors: Vec<(&'static str, f64)>) -> Self {
        factors.push(("raw", raw));
        let n = if raw.is_finite() {
            raw.ceil().max(1.0).min(u64::MAX as f64) as u64
        } else {
            u64::MAX
        };
        Self { n, factors }
    }

    fn one(reason: &'static str) -> Self {
        Self {
            n: 1,
            factors: vec![(reason, 1.0)],
        }
    }
}

fn ln_pos(v: f64) -> f64 {
    v.ln().max(0.0)
}

/// Online convex bound `min(v4, max(d, v5))` with
/// `v4 = kappa M^2 R^2 / eps^max(2,p) ln(1/sigma)` (the `N <= d` shape) and
/// `v5 = d^(1 - 2/max(2,p)) M^2 R^2 / eps^2 ln(1/sigma)` (the `N >= d` shape).
/// For `p <= 2` this is exactly "v4 if v4 <= d, else max(d, v5)"; for `p > 2`
/// the outer min keeps the value nondecreasing in `d`.
pub fn n_online_convex(s: &RegimeSpec) -> Result<Prediction> {
    s.check()?;
    if s.eps >= s.m * s.r {
        return Ok(Prediction::one("eps >= MR"));
    }
    let kappa = kappa_p(s.p, s.d)?;
    let pm = s.p.max(2.0);
    let base = s.m * s.m * s.r * s.r;
    let conf = ln_pos(1.0 / s.sigma);
    let d = s.d as f64;
    let v4 = s.const_mult * kappa * base / s.eps.powf(pm) * conf;
    let v5 = s.const_mult * d.powf(1.0 - 2.0 / pm) * base / (s.eps * s.eps) * conf;
    let (raw, branch) = if v4 <= v5.max(d) { (v4, 4.0) } else { (v5.max(d), 5.0) };
    Ok(Prediction::from_value(
        raw,
        vec![("kappa", kappa), ("branch4", v4), ("branch5", v5), ("branch", branch)],
    ))
}

/// Offline convex bound `M^2 R^2 / (eps - delta)^2 (d ln(MR/(eps - delta)) + ln(1/sigma))`.
pub fn n_offline_convex(s: &RegimeSpec) -> Result<Prediction> {
    s.check()?;
    if !(s.delta >= 0.0 && s.delta < s.eps) {
        return Err(invalid(
            "delta",
            format!("need 0 <= delta < eps, got delta = {} and eps = {}", s.delta, s.eps),
        ));
    }
    let gap = s.eps - s.delta;
    let d = s.d as f64;
    let scale = s.m * s.m * s.r * s.r / (gap * gap);
    let log_term = d * ln_pos(s.m * s.r / gap) + ln_pos(1.0 / s.sigma);
    Ok(Prediction::from_value(
        s.const_mult * scale * log_term,
        vec![("scale", scale), ("log_term", log_term)],
    ))
}

/// Online strongly convex bound `kappa M^2/(mu eps) ln(ln(M^2/(mu eps)) / sigma)`,
/// with the inner logarithm floored at 1.
pub fn n_online_sc(s: &RegimeSpec) -> Result<Prediction> {
    s.check()?;
    if !(s.mu > 0.0) {
        return Err(invalid("mu", format!("{} must be positive", s.mu)));
    }
    let ratio = s.m * s.m / (s.mu * s.eps);
    if ratio <= 1.0 {
        return Ok(Prediction::one("mu eps >= M^2"));
    }
    let kappa = kappa_p(s.p, s.d)?;
    let inner = ratio.max(std::f64::consts::E).ln();
    let log_term = ln_pos(inner / s.sigma);
    Ok(Prediction::from_value(
        s.const_mult * kappa * ratio * log_term,
        vec![("kappa", kappa), ("ratio", ratio), ("log_term", log_term)],
    ))
}

/// Offline strongly convex bound
/// `M^2/(mu eps) (ln(M^2/(mu eps)) + ln ln(1/sigma)) ln(1/sigma)`.
pub fn n_offline_sc(s: &RegimeSpec) -> Result<Prediction> {
    s.check()?;
    if !(s.mu > 0.0) {
        return Err(invalid("mu", format!("{} must be positive", s.mu)));
    }
    let ratio = s.m * s.m / (s.mu * s.eps);
    if ratio <= 1.0 {
        return Ok(Prediction::one("mu eps >= M^2"));
    }
    let conf = ln_pos(1.0 / s.sigma);
    let log_term = ln_pos(ratio) + ln_pos(conf);
    Ok(Prediction::from_value(
        s.const_mult * ratio * log_term * conf,
        vec![("ratio", ratio), ("log_term", log_term), ("conf", conf)],
    ))
}

/// Offline bound under `gamma`-growth:
/// `lambda^2 / (mu_gamma^(2/gamma) eps^(2(gamma-1)/gamma)) (d ln(M R_eps / eps) + ln(1/sigma))`.
pub fn n_growth(s: &RegimeSpec) -> Result<Prediction> {
    s.check()?;
    if !(s.gamma >= 1.0) {
        return Err(invalid("gamma", format!("{} must be >= 1", s.gamma)));
    }
    if !(s.lambda > 0.0 && s.mu_gamma > 0.0) {
        return Err(invalid("lambda", "lambda and mu_gamma must be positive"));
    }
    let r_eps = s.r_eps.unwrap_or(if s.gamma == 1.0 {
        4.0 * s.eps / s.mu_gamma
    } else {
        2.0 * s.r
    });
    let power = s.lambda * s.lambda
        / (s.mu_gamma.powf(2.0 / s.gamma) * s.eps.powf(2.0 * (s.gamma - 1.0) / s.gamma));
    let log_term = s.d as f64 * ln_pos(s.m * r_eps / s.eps) + ln_pos(1.0 / s.sigma);
    Ok(Prediction::from_value(
        s.const_mult * power * log_term,
        vec![("power", power), ("r_eps", r_eps), ("log_term", log_term)],
    ))
}

/// `N_x + N_y`, each term the growth bound of its block; a block of
/// dimension 0 contributes nothing.
pub fn n_saddle(sx: &RegimeSpec, sy: &RegimeSpec) -> Result<Prediction> {
    let part = |s: &RegimeSpec| -> Result<u64> {
        if s.d == 0 {
            Ok(0)
        } else {
            Ok(n_growth(s)?.n)
        }
    };
    let nx = part(sx)?;
    let ny = part(sy)?;
    Ok(Prediction {
        n: (nx.saturating_add(ny)).max(1),
        factors: vec![("n_x", nx as f64), ("n_y", ny as f64)],
    })
}

/// Dispatches on `regime`; the saddle regime uses `spec` for both blocks.
pub fn predict(regime: Regime, spec: &RegimeSpec) -> Result<Prediction> {
    match regime {
        Regime::ConvexOnline => n_online_convex(spec),
        Regime::ConvexOffline => n_offline_convex(spec),
        Regime::ScOnline => n_online_sc(spec),
        Regime::ScOffline => n_offline_sc(spec),
        Regime::GrowthOffline => n_growth(spec),
        Regime::SaddleOffline => n_saddle(spec, spec),
    }
}
