use super::*;
use crate::distributions::{OffspringLaw, SibuyaLaw};
use crate::verify::oracle::{ode_oracle_f, quad_oracle_phi};
use proptest::prelude::*;

fn params(k: f64, beta: f64, gamma: f64, theta: f64) -> ModelParams {
    ModelParams::new(k, beta, gamma, theta).unwrap()
}

#[test]
fn derived_constants() {
    let p = params(1.0, 0.5, 0.25, 1.0);
    assert_eq!(p.a(), 3.0);
    assert_eq!(p.delta(), 0.5);
    assert_eq!(p.ordering(), Ordering::GammaBelow);
    assert_eq!(params(1.0, 0.5, 0.5, 1.0).ordering(), Ordering::Equal);
    assert_eq!(params(1.0, 0.5, 0.75, 1.0).ordering(), Ordering::GammaAbove);
    assert_eq!(params(1.0, 0.5, 0.5 + 5e-10, 1.0).ordering(), Ordering::Equal);
}

#[test]
fn parameter_validation_names_constraint() {
    let err = ModelParams::new(0.0, 0.5, 0.5, 1.0).unwrap_err();
    assert!(err.to_string().contains("K > 0"));
    assert!(ModelParams::new(1.0, 1.2, 0.5, 1.0).is_err());
    assert!(ModelParams::new(1.0, 0.5, 0.0, 1.0).is_err());
    assert!(ModelParams::new(1.0, 0.5, 0.5, -1.0).is_err());
    assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0).is_ok());
}

#[test]
fn pgf_f_examples() {
    let p = params(1.0, 0.5, 0.5, 1.0);
    assert_eq!(pgf_f(0.0, 0.3, &p).unwrap(), 0.3);
    for &t in &[0.0, 1.0, 1e6] {
        assert_eq!(pgf_f(t, 1.0, &p).unwrap(), 1.0);
    }
    let closed = pgf_f(2.0, 0.5, &p).unwrap();
    let ode = ode_oracle_f(2.0, 0.5, &p, 1e-12).unwrap();
    assert!((closed - ode).abs() <= 1e-10, "{closed} vs {ode}");
    assert!(pgf_f(-1.0, 0.5, &p).is_err());
    assert!(pgf_f(1.0, 1.5, &p).is_err());
}

#[test]
fn b_function_examples() {
    let p = params(1.0, 0.5, 0.5, 1.0);
    assert_eq!(b_function(0.0, 0.7, &p).unwrap(), 1.0);
    assert_eq!(b_function(p.a(), 0.0, &p).unwrap(), 2.0);
    assert_eq!(b_function(4.0, 1.0, &p).unwrap(), 1.0);
    let b = b_function(3.0, 0.5, &p).unwrap();
    assert!((b - (1.0 + 0.5f64.sqrt())).abs() < 1e-15);
}

#[test]
fn pgf_phi_examples() {
    let eq = params(1.0, 0.5, 0.5, 1.0);
    assert_eq!(pgf_phi(0.0, 0.4, &eq).unwrap(), 1.0);
    assert!((pgf_phi(3.0, 0.0, &eq).unwrap() - 0.125).abs() < 1e-15);
    let ne = params(1.0, 0.5, 0.25, 1.0);
    let closed = pgf_phi(1.0, 0.5, &ne).unwrap();
    let quad = quad_oracle_phi(1.0, 0.5, &ne, 1e-13).unwrap();
    assert!((closed - quad).abs() <= 1e-10, "{closed} vs {quad}");
    for p in [eq, ne, params(2.0, 0.3, 0.9, 0.5)] {
        assert_eq!(pgf_phi(17.0, 1.0, &p).unwrap(), 1.0);
        assert!(pgf_phi(17.0, 1.0 - 1e-14, &p).unwrap() <= 1.0);
    }
}

#[test]
fn phi_alternative_forms_agree() {
    // (B^(1-delta) - 1)/(1-delta) against (1 - B^-(delta-1))/(delta-1).
    let p = params(1.0, 0.5, 0.75, 1.0);
    for &(t, s) in &[(0.5, 0.1), (3.0, 0.5), (40.0, 0.9)] {
        let w: f64 = 1.0 - s;
        let b = b_function(t, s, &p).unwrap();
        let d = p.delta();
        let alt = (-p.theta() * p.a() * w.powf(p.gamma() - p.beta()) * (1.0 - b.powf(1.0 - d)) / (d - 1.0)).exp();
        let lit = (-p.theta() * p.a() * w.powf(p.gamma() - p.beta()) * (b.powf(1.0 - d) - 1.0) / (1.0 - d)).exp();
        let got = pgf_phi(t, s, &p).unwrap();
        assert!((got - alt).abs() < 1e-14 && (got - lit).abs() < 1e-14);
    }
}

#[test]
fn regimes_connect_continuously() {
    let base = params(1.0, 0.5, 0.5, 1.0);
    for &(t, s) in &[(1.0, 0.3), (10.0, 0.0), (100.0, 0.9)] {
        let v0 = pgf_phi(t, s, &base).unwrap();
        let mut prev = f64::INFINITY;
        for &eps in &[1e-3, 1e-5, 1e-7] {
            let diff = [eps, -eps]
                .iter()
                .map(|&e| (pgf_phi(t, s, &params(1.0, 0.5, 0.5 + e, 1.0)).unwrap() - v0).abs())
                .fold(0.0, f64::max);
            assert!(diff < prev);
            // First-order sensitivity to gamma is O(1) times eps.
            assert!(diff < 50.0 * eps, "t={t} s={s} eps={eps} diff={diff}");
            prev = diff;
        }
    }
}

#[test]
fn series_examples() {
    let p = params(1.0, 0.5, 0.25, 1.0);
    let first = pgf_phi_series(1.0, 0.6, &p, 1).unwrap();
    let w: f64 = 0.4;
    assert!((first.value - (-w.powf(0.25)).exp()).abs() < 1e-16);
    assert_eq!(first.order, 1);
    // x = t (1-s)^beta / A = 0.5 with s = 0.75.
    let t = 0.5 * p.a() / 0.25f64.sqrt();
    let series = pgf_phi_series(t, 0.75, &p, 40).unwrap();
    let closed = pgf_phi(t, 0.75, &p).unwrap();
    assert!((series.value - closed).abs() <= 1e-10);
    for order in [1, 5, 64] {
        assert_eq!(pgf_phi_series(1e3, 1.0, &p, order).unwrap().value, 1.0);
    }
    assert!(matches!(
        pgf_phi_series(100.0, 0.0, &p, 10),
        Err(Error::OutsideConvergence { .. })
    ));
    assert!(pgf_phi_series(1.0, 0.5, &p, 0).is_err());
}

#[test]
fn series_stop_rule_converges() {
    let p = params(1.0, 0.5, 0.75, 2.0);
    let t = 0.9 * p.a();
    let s = 0.0;
    let auto = pgf_phi_series_auto(t, s, &p).unwrap();
    assert!(auto.order > 64 && auto.order < SERIES_MAX_TERMS);
    assert!((auto.value - pgf_phi(t, s, &p).unwrap()).abs() < 1e-12);
}

#[test]
fn factorial_identity_examples() {
    assert_eq!(factorial_identity_check(0.5, 1), (0.5, 0.5));
    let (l, r) = factorial_identity_check(2.0, 3);
    assert_eq!(l, (-1.0) * (-2.0) * (-3.0));
    assert_eq!(l, r);
    assert_eq!(factorial_identity_middle(2.0, 3), l);
    for j in 1..8 {
        let (l, r) = factorial_identity_check(1.0, j);
        assert_eq!(l, 0.0);
        assert_eq!(r.abs(), 0.0);
    }
    for &d in &[0.3, 0.5, 1.7, 3.0] {
        for j in 1..15 {
            let (l, r) = factorial_identity_check(d, j);
            let m = factorial_identity_middle(d, j);
            let scale = l.abs().max(1.0);
            assert!((l - r).abs() < 1e-12 * scale && (l - m).abs() < 1e-12 * scale);
        }
    }
}

#[test]
fn extinction_probabilities() {
    let p = params(1.0, 0.5, 0.5, 1.0);
    assert_eq!(extinction_prob_x(0.0, &p).unwrap(), 0.0);
    assert!((extinction_prob_x(p.a(), &p).unwrap() - 0.75).abs() < 1e-15);
    for &t in &[0.1, 1.0, 10.0, 1e4] {
        assert_eq!(extinction_prob_x(t, &p).unwrap(), pgf_f(t, 0.0, &p).unwrap());
    }
    assert_eq!(extinction_prob_y(0.0, &p).unwrap(), 1.0);
    assert!((extinction_prob_y(3.0, &p).unwrap() - 0.125).abs() < 1e-15);
    for q in [p, params(1.0, 0.5, 0.25, 2.0), params(0.5, 0.3, 0.8, 0.5)] {
        for &t in &[0.1, 1.0, 10.0, 1e3] {
            let a = extinction_prob_y(t, &q).unwrap();
            let b = pgf_phi(t, 0.0, &q).unwrap();
            assert!((a - b).abs() <= 1e-14 * a.max(1e-300), "{a} vs {b}");
        }
        let quad = quad_oracle_phi(5.0, 0.0, &q, 1e-13).unwrap();
        assert!((extinction_prob_y(5.0, &q).unwrap() - quad).abs() < 1e-10);
    }
    let mut prev = 0.0;
    for i in 1..50 {
        let v = extinction_prob_x(i as f64, &p).unwrap();
        assert!(v > prev);
        prev = v;
    }
}

#[test]
fn generator_functions() {
    let p = params(2.0, 0.5, 0.25, 1.5);
    assert_eq!(infinitesimal_f(1.0, &p).unwrap(), 0.0);
    assert!((infinitesimal_f(0.0, &p).unwrap() - 2.0 / 1.5).abs() < 1e-15);
    assert_eq!(infinitesimal_phi(1.0, &p).unwrap(), 0.0);
    assert_eq!(infinitesimal_phi(0.0, &p).unwrap(), 1.5);

    // K (h(s) - s) from the offspring pmf series.
    let off = OffspringLaw::new(p.beta()).unwrap();
    let s: f64 = 0.5;
    let h: f64 = (0..200u64).map(|k| off.pmf(k) * s.powi(k as i32)).sum();
    assert!((p.k() * (h - s) - infinitesimal_f(s, &p).unwrap()).abs() < 1e-13);
    // theta (1 - g(s)) from Sibuya partial sums.
    let sib = SibuyaLaw::new(p.gamma()).unwrap();
    let g: f64 = (1..200u64).map(|k| sib.pmf(k) * s.powi(k as i32)).sum();
    assert!((p.theta() * (1.0 - g) - infinitesimal_phi(s, &p).unwrap()).abs() < 1e-13);
}

#[test]
fn criticality_identity_on_grid() {
    for &(k, b) in &[(0.5, 0.25), (1.0, 0.5), (2.0, 0.75), (1.3, 1.0)] {
        let p = params(k, b, 0.5, 1.0);
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            let x = infinitesimal_f(s, &p).unwrap();
            let y = infinitesimal_f_via_a(s, &p).unwrap();
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-300) + 1e-300);
        }
    }
}

#[test]
fn pde_residual_small_and_second_order() {
    for p in [params(1.0, 0.5, 0.25, 1.0), params(1.0, 0.5, 0.5, 1.0)] {
        let r1 = pde_residual(1.0, 0.5, &p, 1e-4).unwrap();
        let r2 = pde_residual(1.0, 0.5, &p, 5e-5).unwrap();
        assert!(r1.abs() <= 1e-6, "{r1}");
        let ratio = r1 / r2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        assert_eq!(pde_residual(1.0, 1.0, &p, 1e-4).unwrap(), 0.0);
    }
    let p = params(1.0, 0.5, 0.25, 1.0);
    assert!(pde_residual(1.0, 0.5, &p, 0.0).is_err());
    assert!(pde_residual(1e-5, 0.5, &p, 1e-4).is_err());
}

#[test]
fn normalization_examples() {
    let p = params(1.0, 0.5, 0.5, 1.0);
    assert_eq!(normalization_z(p.a(), 0.5, &p).unwrap(), 1.0);
    assert!((normalization_z(4.0 * p.a(), 0.5, &p).unwrap() - 1.0 / 16.0).abs() < 1e-16);
    let zs: Vec<f64> = (1..30)
        .map(|i| normalization_z(i as f64 * 10.0, 0.5, &p).unwrap())
        .collect();
    assert!(zs.windows(2).all(|w| w[1] < w[0]));
    assert!(normalization_z(0.0, 0.5, &p).is_err());
}

#[test]
fn finite_laplace_examples() {
    let p = params(1.0, 0.5, 0.25, 1.0);
    let case = RegimeLimit::new(2, &p).unwrap();
    assert_eq!(finite_laplace(30.0, 0.0, &case, &p).unwrap(), 1.0);
    let t = 30.0;
    let z = normalization_z(t, case.normalization_exponent, &p).unwrap();
    let lam = 0.7;
    let direct = pgf_phi(t, (-lam * z).exp(), &p).unwrap();
    assert!((finite_laplace(t, lam, &case, &p).unwrap() - direct).abs() < 1e-12);
    let vals: Vec<f64> = (0..20)
        .map(|i| finite_laplace(t, 0.1 * i as f64, &case, &p).unwrap())
        .collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn laplace_survives_sub_epsilon_arguments() {
    // z = 1e-16 at t = 1e4 A for gamma = 1/4; e^{-z} rounds to 1 but the
    // complement route keeps the exact value.
    let p = params(1.0, 0.5, 0.25, 1.0);
    let case = RegimeLimit::new(2, &p).unwrap();
    let psi = finite_laplace(1e4 * p.a(), 1.0, &case, &p).unwrap();
    let lim = limit_laplace(1.0, &case, &p).unwrap();
    assert!((psi - lim).abs() < 1e-3, "{psi} vs {lim}");
}

#[test]
fn limit_examples() {
    let eq = params(1.0, 0.5, 0.5, 1.0);
    let c1 = RegimeLimit::new(1, &eq).unwrap();
    assert_eq!(c1.limit_kind, LimitKind::PositiveLinnik);
    assert!((limit_laplace(1.0, &c1, &eq).unwrap() - 0.125).abs() < 1e-15);
    let below = params(1.0, 0.5, 0.25, 1.0);
    let c2 = RegimeLimit::new(2, &below).unwrap();
    assert_eq!(c2.normalization_exponent, 0.25);
    assert_eq!(limit_laplace(0.0, &c2, &below).unwrap(), 1.0);
    let c3 = RegimeLimit::new(3, &below).unwrap();
    for &l in &[1e-6, 0.5, 3.0] {
        assert_eq!(limit_laplace(l, &c3, &below).unwrap(), 0.0);
    }
    assert_eq!(limit_laplace(0.0, &c3, &below), Err(Error::UndefinedLimit));
    let above = params(1.0, 0.5, 0.75, 1.0);
    for c in [4, 5] {
        let case = RegimeLimit::new(c, &above).unwrap();
        assert_eq!(limit_laplace(0.0, &case, &above).unwrap(), 1.0);
        assert_eq!(limit_laplace(2.0, &case, &above).unwrap(), 1.0);
    }
    assert!(matches!(
        RegimeLimit::new(2, &above),
        Err(Error::CaseMismatch { case: 2, .. })
    ));
    assert!(RegimeLimit::new(1, &below).is_err());
    assert!(RegimeLimit::new(6, &below).is_err());
    // A case built for other parameters is rejected.
    assert!(limit_laplace(1.0, &c2, &params(1.0, 0.5, 0.3, 1.0)).is_err());
    assert_eq!(RegimeLimit::applicable(&below).len(), 2);
    assert_eq!(RegimeLimit::applicable(&eq).len(), 1);
}

#[test]
fn limit_gap_shrinks_for_proper_limits() {
    let lambdas = [0.5, 1.0, 2.0];
    for (p, case_id) in [(params(1.0, 0.5, 0.5, 1.0), 1), (params(1.0, 0.5, 0.25, 1.0), 2)] {
        let case = RegimeLimit::new(case_id, &p).unwrap();
        let gaps: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
            .iter()
            .map(|&m| {
                lambdas
                    .iter()
                    .map(|&l| {
                        (finite_laplace(m * p.a(), l, &case, &p).unwrap() - limit_laplace(l, &case, &p).unwrap()).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "case {case_id}: {gaps:?}");
        assert!(gaps[2] < 0.01);
    }
}

#[test]
fn negative_binomial_degeneration() {
    let p = params(1.0, 1.0, 1.0, 1.3);
    let t = 2.5;
    let coefs = pgf_phi_coefficients_linear(t, &p, 21).unwrap();
    // NB with r = theta A and success probability q = 1/(1 + t/A).
    let r = p.theta() * p.a();
    let q = 1.0 / (1.0 + t / p.a());
    let mut nb = q.powf(r);
    for (k, c) in coefs.iter().enumerate() {
        if k > 0 {
            nb *= (r + k as f64 - 1.0) / k as f64 * (1.0 - q);
        }
        assert!((c - nb).abs() <= 1e-10, "k={k}");
    }
    // The coefficients sum to the p.g.f. at s = 0.5.
    let s: f64 = 0.5;
    let sum: f64 = pgf_phi_coefficients_linear(t, &p, 200)
        .unwrap()
        .iter()
        .enumerate()
        .map(|(k, c)| c * s.powi(k as i32))
        .sum();
    assert!((sum - pgf_phi(t, s, &p).unwrap()).abs() < 1e-12);
    assert!(pgf_phi_coefficients_linear(t, &params(1.0, 0.5, 0.5, 1.0), 5).is_err());
}

proptest! {
    #[test]
    fn phi_is_a_probability_and_monotone(
        beta in 0.05f64..1.0, gamma in 0.05f64..1.0, k in 0.1f64..5.0, theta in 0.1f64..5.0,
        t in 0.0f64..200.0, dt in 0.001f64..50.0, s in 0.0f64..1.0, ds in 0.0f64..0.5,
    ) {
        let p = params(k, beta, gamma, theta);
        let v = pgf_phi(t, s, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(pgf_phi(t + dt, s, &p).unwrap() <= v * (1.0 + 1e-14));
        let s2 = (s + ds).min(1.0);
        prop_assert!(pgf_phi(t, s2, &p).unwrap() >= v * (1.0 - 1e-14));
        let f = pgf_f(t, s, &p).unwrap();
        prop_assert!((s - 1e-15..=1.0).contains(&f));
        prop_assert!(pgf_f(t + dt, s, &p).unwrap() >= f - 1e-15);
        prop_assert!(pgf_f(t, s2, &p).unwrap() >= f - 1e-15);
    }
}
