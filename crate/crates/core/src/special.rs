//! Factorial polynomials and the asymptotic Gamma-ratio used for far tails.

/// Falling factorial `x (x-1) ... (x-k+1)`; equals 1 for `k = 0`.
pub fn falling_factorial(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (x - j as f64))
}

/// Rising factorial `x (x+1) ... (x+k-1)`; equals 1 for `k = 0`.
pub fn rising_factorial(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (x + j as f64))
}

/// `ln Gamma(x + a) - ln Gamma(x)` for large `x` (error below `x^-4`).
///
/// Used only for `x >= 2^16`, where the Bernoulli-polynomial expansion is
/// far more accurate than differencing two huge `ln Gamma` values.
pub fn ln_gamma_ratio_large(x: f64, a: f64) -> f64 {
    let a2 = a * a;
    let b2 = a2 - a;
    let b3 = a2 * a - 1.5 * a2 + 0.5 * a;
    let b4 = a2 * a2 - 2.0 * a2 * a + a2;
    let inv = 1.0 / x;
    a * x.ln() + inv * (b2 / 2.0 - inv * (b3 / 6.0 - inv * b4 / 12.0))
}

/// `ln(1 - s)` without cancellation near `s = 0`.
#[inline]
pub fn ln_complement(s: f64) -> f64 {
    (-s).ln_1p()
}

/// Coefficients of `exp(a(s))` given those of `a(s)`, truncated to the same length.
pub fn series_exp(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut e = vec![0.0; n];
    if n == 0 {
        return e;
    }
    e[0] = a[0].exp();
    // e' = a' e  =>  k e_k = sum_{j=1..k} j a_j e_{k-j}
    for k in 1..n {
        let acc: f64 = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum();
        e[k] = acc / k as f64;
    }
    e
}
