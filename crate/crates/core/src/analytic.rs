//! Closed-form p.g.f.s, extinction probabilities, generating functions and
//! limit Laplace transforms.
//!
//! Everything is evaluated through the complement `w = 1 - s` so that
//! arguments close to 1 (and Laplace substitutions `s = e^{-lambda z}` with
//! `lambda z` far below machine epsilon) keep full precision.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{falling_factorial, rising_factorial};

/// `|beta - gamma|` at or below this is treated as the equal-exponent case.
pub const REGIME_TOLERANCE: f64 = 1e-9;

/// Hard ceiling on series terms under the stop rule.
pub const SERIES_MAX_TERMS: usize = 4096;

/// Relative size of a term at which series summation stops.
pub const SERIES_STOP: f64 = 1e-15;

/// Model parameters: lifetime rate `K`, reproduction exponent `beta`,
/// immigration exponent `gamma` and immigration intensity `theta`, with the
/// derived constants `A = (1+beta)/(K beta)` and `delta = gamma/beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    k: f64,
    beta: f64,
    gamma: f64,
    theta: f64,
    a: f64,
    delta: f64,
}

/// Ordering of the two exponents, which selects the closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// `beta = gamma`: discrete Linnik law.
    Equal,
    /// `gamma < beta`.
    GammaBelow,
    /// `beta < gamma`.
    GammaAbove,
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ordering::Equal => "beta=gamma",
            Ordering::GammaBelow => "gamma<beta",
            Ordering::GammaAbove => "beta<gamma",
        })
    }
}

impl ModelParams {
    pub fn new(k: f64, beta: f64, gamma: f64, theta: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(domain("K", k, "K > 0"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain("beta", beta, "0 < beta <= 1"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(domain("gamma", gamma, "0 < gamma <= 1"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(domain("theta", theta, "theta > 0"));
        }
        Ok(Self {
            k,
            beta,
            gamma,
            theta,
            a: (1.0 + beta) / (k * beta),
            delta: gamma / beta,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn ordering(&self) -> Ordering {
        if (self.beta - self.gamma).abs() <= REGIME_TOLERANCE {
            Ordering::Equal
        } else if self.gamma < self.beta {
            Ordering::GammaBelow
        } else {
            Ordering::GammaAbove
        }
    }

    /// Copy with `A` multiplied by `factor` and everything else unchanged.
    /// Only meant for sensitivity fixtures: the result is no longer a
    /// consistent parameter set.
    pub fn with_scaled_a(mut self, factor: f64) -> Self {
        self.a *= factor;
        self
    }
}

/// Kind of limit law reached by the normalized process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    PositiveLinnik,
    OneSidedStable,
    DegenerateZero,
    DegenerateOne,
}

/// One (parameter ordering, normalization) combination with a known limit
/// of `Psi(t, lambda)` as `t -> infinity`.
///
/// | case | ordering     | z(t)             | limit                          |
/// |------|--------------|------------------|--------------------------------|
/// | 1    | beta = gamma | `(A/t)^(1/beta)` | `(1 + lambda^beta)^(-theta A)` |
/// | 2    | gamma < beta | `(A/t)^(1/gamma)`| `exp(-theta A lambda^gamma)`   |
/// | 3    | gamma < beta | `(A/t)^(1/beta)` | 0                              |
/// | 4    | beta < gamma | `(A/t)^(1/beta)` | 1                              |
/// | 5    | beta < gamma | `(A/t)^(1/gamma)`| 1                              |
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLimit {
    pub case_id: u8,
    pub normalization_exponent: f64,
    pub limit_kind: LimitKind,
}

impl RegimeLimit {
    pub fn new(case_id: u8, params: &ModelParams) -> Result<Self> {
        let ord = params.ordering();
        let (need, requirement, use_beta, kind) = match case_id {
            1 => (Ordering::Equal, "beta = gamma", true, LimitKind::PositiveLinnik),
            2 => (Ordering::GammaBelow, "gamma < beta", false, LimitKind::OneSidedStable),
            3 => (Ordering::GammaBelow, "gamma < beta", true, LimitKind::DegenerateZero),
            4 => (Ordering::GammaAbove, "beta < gamma", true, LimitKind::DegenerateOne),
            5 => (Ordering::GammaAbove, "beta < gamma", false, LimitKind::DegenerateOne),
            _ => {
                return Err(Error::CaseMismatch {
                    case: case_id,
                    requirement: "a case id between 1 and 5",
                })
            }
        };
        if ord != need {
            return Err(Error::CaseMismatch {
                case: case_id,
                requirement,
            });
        }
        Ok(Self {
            case_id,
            normalization_exponent: if use_beta { params.beta } else { params.gamma },
            limit_kind: kind,
        })
    }

    /// The cases whose parameter ordering matches `params`.
    pub fn applicable(params: &ModelParams) -> Vec<RegimeLimit> {
        (1..=5).filter_map(|c| RegimeLimit::new(c, params).ok()).collect()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain("t", t, "0 <= t < infinity"))
    }
}

fn check_s(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(domain("s", s, "0 <= s <= 1"))
    }
}

/// `w^p` for `w = 1 - s` in `[0, 1]`, with `0^p = 0`.
#[inline]
fn pow_w(w: f64, p: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        (p * w.ln()).exp()
    }
}

/// `1 - F(t, s)` as a function of `w = 1 - s`.
#[inline]
pub fn survival_complement(t: f64, w: f64, p: &ModelParams) -> f64 {
    let x = t * pow_w(w, p.beta) / p.a;
    w * (-x.ln_1p() / p.beta).exp()
}

/// Solution of the backward Kolmogorov equation,
/// `F(t,s) = 1 - (1-s) (1 + K beta (1-s)^beta t/(1+beta))^(-1/beta)`.
pub fn pgf_f(t: f64, s: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    check_s(s)?;
    if t == 0.0 {
        return Ok(s);
    }
    Ok(1.0 - survival_complement(t, 1.0 - s, p))
}

/// `B(t,s) = 1 + t (1-s)^beta / A`.
pub fn b_function(t: f64, s: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    check_s(s)?;
    Ok(1.0 + t * pow_w(1.0 - s, p.beta) / p.a)
}

/// `(B^(1-delta) - 1) / ((1 - delta) x)` with `B = 1 + x`; the integral
/// `int_0^1 (1 + x v)^(-delta) dv`, equal to 1 at `x = 0`.
#[inline]
fn integral_factor(x: f64, delta: f64, equal: bool) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let l = x.ln_1p();
    if equal {
        l / x
    } else {
        let c = 1.0 - delta;
        (c * l).exp_m1() / (c * x)
    }
}

/// `-ln Phi(t, s)` as a function of `w = 1 - s`.
#[inline]
pub fn log_pgf_phi_neg(t: f64, w: f64, p: &ModelParams) -> f64 {
    let x = t * pow_w(w, p.beta) / p.a;
    match p.ordering() {
        Ordering::Equal => p.theta * p.a * x.ln_1p(),
        _ => p.theta * t * pow_w(w, p.gamma) * integral_factor(x, p.delta, false),
    }
}

/// `Phi(t, s)` as a function of `w = 1 - s`.
#[inline]
pub fn pgf_phi_complement(t: f64, w: f64, p: &ModelParams) -> f64 {
    (-log_pgf_phi_neg(t, w, p)).exp()
}

/// P.g.f. of `Y(t)`: `B^(-theta A)` when `beta = gamma`, otherwise
/// `exp{-theta A (1-s)^(gamma-beta) (B^(1-delta) - 1)/(1-delta)}`.
pub fn pgf_phi(t: f64, s: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    check_s(s)?;
    Ok(pgf_phi_complement(t, 1.0 - s, p))
}

/// Result of a truncated series evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Highest `j` included in the sum.
    pub order: usize,
}

fn series_ratio(t: f64, s: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    check_s(s)?;
    let x = t * pow_w(1.0 - s, p.beta) / p.a;
    if x >= 1.0 {
        return Err(Error::OutsideConvergence { ratio: x });
    }
    Ok(x)
}

fn series_sum(t: f64, s: f64, p: &ModelParams, max_order: usize, stop: Option<f64>) -> Result<SeriesValue> {
    if max_order == 0 {
        return Err(domain("order", 0.0, "order >= 1"));
    }
    let x = series_ratio(t, s, p)?;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut order = 1;
    for j in 2..=max_order {
        let jf = j as f64;
        term *= x * (-p.delta - (jf - 2.0)) / jf;
        sum += term;
        order = j;
        if let Some(eps) = stop {
            if term.abs() < eps * sum.abs() {
                break;
            }
        }
    }
    let value = (-p.theta * t * pow_w(1.0 - s, p.gamma) * sum).exp();
    Ok(SeriesValue { value, order })
}

/// Series form of `Phi` summed through exactly `order` terms:
/// `exp{-theta t (1-s)^gamma (1 + sum_{j=2..order} x^(j-1) [-delta]_(j-1) / j!)}`
/// with `x = t (1-s)^beta / A`, which must lie in `[0, 1)`.
pub fn pgf_phi_series(t: f64, s: f64, p: &ModelParams, order: usize) -> Result<SeriesValue> {
    series_sum(t, s, p, order, None)
}

/// Series form of `Phi` stopped once a term falls below `1e-15` of the
/// partial sum (at most [`SERIES_MAX_TERMS`] terms).
pub fn pgf_phi_series_auto(t: f64, s: f64, p: &ModelParams) -> Result<SeriesValue> {
    series_sum(t, s, p, SERIES_MAX_TERMS, Some(SERIES_STOP))
}

/// Both sides of `[1-delta]_j (falling) = -(delta-1) (-1)^(j-1) [delta]^(j-1) (rising)`.
pub fn factorial_identity_check(delta: f64, j: u32) -> (f64, f64) {
    let lhs = falling_factorial(1.0 - delta, j);
    let sign = if (j - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let rhs = -(delta - 1.0) * sign * rising_factorial(delta, j.saturating_sub(1));
    (lhs, rhs)
}

/// The middle form `(1-delta) [-delta]_(j-1)` of the same identity.
pub fn factorial_identity_middle(delta: f64, j: u32) -> f64 {
    (1.0 - delta) * falling_factorial(-delta, j.saturating_sub(1))
}

/// `F(t, 0) = 1 - (1 + t/A)^(-1/beta)`.
pub fn extinction_prob_x(t: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    Ok(1.0 - (-(t / p.a).ln_1p() / p.beta).exp())
}

/// `Phi(t, 0)`: `(1 + t/A)^(-theta A)` or
/// `exp{-theta A ((1 + t/A)^(1-delta) - 1)/(1-delta)}`.
pub fn extinction_prob_y(t: f64, p: &ModelParams) -> Result<f64> {
    check_time(t)?;
    let l = (t / p.a).ln_1p();
    Ok(match p.ordering() {
        Ordering::Equal => (-p.theta * p.a * l).exp(),
        _ => {
            let c = 1.0 - p.delta;
            (-p.theta * p.a * (c * l).exp_m1() / c).exp()
        }
    })
}

/// `f(s) = K (1-s)^(1+beta) / (1+beta)`.
pub fn infinitesimal_f(s: f64, p: &ModelParams) -> Result<f64> {
    check_s(s)?;
    Ok(p.k * pow_w(1.0 - s, 1.0 + p.beta) / (1.0 + p.beta))
}

/// The same generator written through `A`: `(1-s)^(1+beta) / (A beta)`.
pub fn infinitesimal_f_via_a(s: f64, p: &ModelParams) -> Result<f64> {
    check_s(s)?;
    Ok(pow_w(1.0 - s, 1.0 + p.beta) / (p.a * p.beta))
}

/// `phi(s) = theta (1-s)^gamma`.
pub fn infinitesimal_phi(s: f64, p: &ModelParams) -> Result<f64> {
    check_s(s)?;
    Ok(p.theta * pow_w(1.0 - s, p.gamma))
}

/// `Phi_t + phi(s) Phi - f(s) Phi_s` with both partials taken by central
/// differences of width `step`. The exact residual is zero, so the value
/// measures finite-difference error, `O(step^2)` for smooth points. Choosing
/// `step` small enough for the local curvature is left to the caller.
pub fn pde_residual(t: f64, s: f64, p: &ModelParams, step: f64) -> Result<f64> {
    check_time(t)?;
    check_s(s)?;
    if s == 1.0 {
        return Ok(0.0);
    }
    if step.is_nan() || step <= 0.0 || t - step < 0.0 || s - step < 0.0 || s + step > 1.0 {
        return Err(domain("step", step, "0 < step <= min(t, s, 1 - s)"));
    }
    let phi = |t: f64, s: f64| pgf_phi_complement(t, 1.0 - s, p);
    let dt = (phi(t + step, s) - phi(t - step, s)) / (2.0 * step);
    let ds = (phi(t, s + step) - phi(t, s - step)) / (2.0 * step);
    Ok(dt + infinitesimal_phi(s, p)? * phi(t, s) - infinitesimal_f_via_a(s, p)? * ds)
}

/// `z(t) = (A/t)^(1/exponent)`.
pub fn normalization_z(t: f64, exponent: f64, p: &ModelParams) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain("t", t, "t > 0"));
    }
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(domain("exponent", exponent, "0 < exponent <= 1"));
    }
    Ok((p.a / t).powf(1.0 / exponent))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain("lambda", lambda, "lambda >= 0"))
    }
}

fn check_case(case: &RegimeLimit, p: &ModelParams) -> Result<()> {
    let expected = RegimeLimit::new(case.case_id, p)?;
    if expected != *case {
        return Err(Error::CaseMismatch {
            case: case.case_id,
            requirement: "a normalization matching the parameters",
        });
    }
    Ok(())
}

/// `Psi(t, lambda) = Phi(t, e^(-lambda z(t)))`, the Laplace transform of
/// the normalized process `Y(t) z(t)`.
pub fn finite_laplace(t: f64, lambda: f64, case: &RegimeLimit, p: &ModelParams) -> Result<f64> {
    check_lambda(lambda)?;
    check_case(case, p)?;
    let z = normalization_z(t, case.normalization_exponent, p)?;
    let w = -(-lambda * z).exp_m1();
    Ok(pgf_phi_complement(t, w, p))
}

/// `lim_{t -> infinity} Psi(t, lambda)` for the given case.
pub fn limit_laplace(lambda: f64, case: &RegimeLimit, p: &ModelParams) -> Result<f64> {
    check_lambda(lambda)?;
    check_case(case, p)?;
    Ok(match case.case_id {
        1 => (-p.theta * p.a * lambda.powf(p.beta).ln_1p()).exp(),
        2 => (-p.theta * p.a * lambda.powf(p.gamma)).exp(),
        3 if lambda == 0.0 => return Err(Error::UndefinedLimit),
        3 => 0.0,
        _ => 1.0,
    })
}

/// First `n` power-series coefficients of `Phi(t, .)` at `beta = gamma = 1`,
/// where `Phi = exp(-theta A ln(1 + c - c s))` with `c = t/A`, obtained by
/// exponentiating the logarithm's series.
pub fn pgf_phi_coefficients_linear(t: f64, p: &ModelParams, n: usize) -> Result<Vec<f64>> {
    check_time(t)?;
    if p.beta != 1.0 || p.gamma != 1.0 {
        return Err(Error::CaseMismatch {
            case: 1,
            requirement: "beta = gamma = 1 for the linear birth-death coefficients",
        });
    }
    let c = t / p.a;
    let q = c / (1.0 + c);
    // ln B(s) = ln(1 + c) - sum_{k>=1} q^k s^k / k
    let mut log_series = vec![0.0; n];
    if n > 0 {
        log_series[0] = -p.theta * p.a * c.ln_1p();
    }
    let mut qk = 1.0;
    for (k, coef) in log_series.iter_mut().enumerate().skip(1) {
        qk *= q;
        *coef = p.theta * p.a * qk / k as f64;
    }
    Ok(crate::special::series_exp(&log_series))
}

#[cfg(test)]
mod tests;
