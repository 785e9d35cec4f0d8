//! Monte Carlo estimators of `E[s^{X(t)}]`, `E[s^{Y(t)}]` and
//! `E[exp(-lambda z(t) Y(t))]` with normal-approximation standard errors.
//!
//! Every summand lies in `[0, 1]`, so the sample means have finite variance
//! even though `Y(t)` has infinite mean.
//!
//! Runs that saturate or abort are kept in the average with contribution 0.
//! A run stopped at time `tau` with `m` particles alive has a true
//! contribution in `[0, F(t - tau, s)^m]`, because immigration only adds
//! particles. The average of those upper ends is reported as part of
//! `truncation_bias_bound`.

use serde::Serialize;

use crate::analytic::{
    finite_laplace, limit_laplace, normalization_z, pgf_f, pgf_phi, survival_complement, ModelParams, RegimeLimit,
};
use crate::distributions::{sample_poisson, OffspringLaw, SibuyaLaw};
use crate::error::{domain, Error, Result};
use crate::rng::RngStream;
use crate::simulator::{
    parallel_map, run_replicates_checkpoints, saturation_level_w, PopulationState, Process, SimConfig,
};

/// Saturation levels are chosen so that a saturated run contributes at most
/// this much to the estimated expectation.
pub const SATURATION_EPS: f64 = 1e-12;
/// Batch cap used by the cohort engine; the Sibuya sampler reaches it through
/// the asymptotic tail.
pub const COHORT_BATCH_CAP: u64 = 1_000_000_000_000_000_000;
/// Reports whose abort fraction exceeds this are flagged.
pub const ABORT_FLAG_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub label: String,
    pub point: String,
    pub mc_estimate: f64,
    pub std_error: f64,
    pub analytic_value: f64,
    pub z_score: f64,
    pub n_replicates: u64,
    pub abort_fraction: f64,
    pub truncation_bias_bound: f64,
    /// `t -> infinity` limit, for Laplace transforms.
    pub limit_value: Option<f64>,
    /// `|finite-t value - limit|` computed analytically.
    pub limit_gap: Option<f64>,
    pub flagged: bool,
}

impl EstimateReport {
    /// `|z| <= threshold`.
    pub fn within(&self, threshold: f64) -> bool {
        self.z_score.abs() <= threshold
    }
}

/// How `Psi(t, lambda)` is sampled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LaplaceEngine {
    /// Simulate `Y(t)` event by event.
    EventDriven,
    /// Simulate the immigration epochs and batch sizes exactly and average
    /// `prod_i F(t - tau_i, s)^{I_i}`, the conditional expectation of
    /// `s^{Y(t)}` given the immigration record. The branching part enters
    /// through the closed form of `F`, which is checked against the ODE
    /// oracle separately.
    Cohort { batch_cap: u64 },
}

impl LaplaceEngine {
    pub fn cohort() -> Self {
        LaplaceEngine::Cohort {
            batch_cap: COHORT_BATCH_CAP,
        }
    }
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

pub(crate) fn z_score(estimate: f64, analytic: f64, se: f64) -> f64 {
    let diff = estimate - analytic;
    if se.is_nan() {
        f64::NAN
    } else if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// `ln F(u, s)` with `s = 1 - w`.
#[inline]
fn ln_f(u: f64, w: f64, p: &ModelParams) -> f64 {
    (-survival_complement(u, w, p)).ln_1p()
}

/// Upper end of a stopped run's contribution: `F(t - clock, s)^alive`.
fn stopped_bound(st: &PopulationState, t: f64, w: f64, p: &ModelParams) -> f64 {
    if !st.incomplete() {
        return 0.0;
    }
    (st.alive as f64 * ln_f((t - st.clock).max(0.0), w, p)).exp()
}

/// Chance that one offspring or batch draw is truncated in a way that can
/// change the estimate. A draw above `batch_cap` saturates the run whether
/// or not it is truncated once the saturation level is at most the cap.
fn cap_hit_probability(cfg: &SimConfig) -> Result<f64> {
    if cfg.saturation.is_some_and(|m| m <= cfg.batch_cap) {
        return Ok(0.0);
    }
    let p = &cfg.params;
    let off = OffspringLaw::new(p.beta())?.survival(cfg.batch_cap);
    let sib = SibuyaLaw::new(p.gamma())?.survival(cfg.batch_cap);
    Ok(off.max(sib))
}

fn check_s(s: f64) -> Result<()> {
    if (0.0..1.0).contains(&s) {
        Ok(())
    } else {
        Err(domain("s", s, "0 <= s < 1"))
    }
}

/// P.g.f. estimates for every `(t, s)` pair from one set of `n` replicates
/// checkpointed at `times`. Row order is `times`-major.
pub fn estimate_pgf_grid(
    process: Process,
    times: &[f64],
    s_values: &[f64],
    n: u64,
    cfg: &SimConfig,
    workers: usize,
) -> Result<Vec<EstimateReport>> {
    estimate_pgf_grid_against(process, times, s_values, n, cfg, workers, &cfg.params)
}

/// As [`estimate_pgf_grid`], comparing against closed forms evaluated at
/// `analytic` rather than the simulated parameters.
pub(crate) fn estimate_pgf_grid_against(
    process: Process,
    times: &[f64],
    s_values: &[f64],
    n: u64,
    cfg: &SimConfig,
    workers: usize,
    analytic: &ModelParams,
) -> Result<Vec<EstimateReport>> {
    for &s in s_values {
        check_s(s)?;
    }
    if times.is_empty() || s_values.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let horizon = *sorted.last().unwrap();
    let s_max = s_values.iter().copied().fold(0.0, f64::max);
    let mut run_cfg = cfg.clone().with_horizon(horizon);
    if let Some(m) = saturation_level_w(horizon, 1.0 - s_max, &cfg.params, SATURATION_EPS) {
        run_cfg.saturation = Some(run_cfg.saturation.map_or(m, |c| c.min(m)));
    }
    let runs = run_replicates_checkpoints(&run_cfg, process, n, workers, &sorted)?;
    let cap_hit = cap_hit_probability(&run_cfg)?;
    let nn = runs.len();
    let mut out = Vec::with_capacity(times.len() * s_values.len());
    for &t in times {
        let idx = sorted.iter().position(|&x| x == t).unwrap();
        let states: Vec<&PopulationState> = runs.iter().map(|r| &r[idx]).collect();
        let aborted = states.iter().filter(|s| s.aborted).count();
        let abort_fraction = if nn == 0 { 0.0 } else { aborted as f64 / nn as f64 };
        let mean_events = mean(states.iter().map(|s| s.events_processed as f64), nn);
        for &s in s_values {
            let w = 1.0 - s;
            let values: Vec<f64> = states
                .iter()
                .map(|st| if st.incomplete() { 0.0 } else { s.powf(st.alive as f64) })
                .collect();
            let (est, se) = mean_and_se(&values);
            let stop_bound = mean(states.iter().map(|st| stopped_bound(st, t, w, &cfg.params)), nn);
            let (label, analytic_value) = match (process, s == 0.0) {
                (Process::X, false) => ("pgf_F_mc", pgf_f(t, s, analytic)?),
                (Process::X, true) => ("extinction_X_mc", pgf_f(t, 0.0, analytic)?),
                (Process::Y, false) => ("pgf_Phi_mc", pgf_phi(t, s, analytic)?),
                (Process::Y, true) => ("extinction_Y_mc", pgf_phi(t, 0.0, analytic)?),
            };
            out.push(EstimateReport {
                label: label.to_string(),
                point: format!("t={t};s={s}"),
                mc_estimate: est,
                std_error: se,
                analytic_value,
                z_score: z_score(est, analytic_value, se),
                n_replicates: nn as u64,
                abort_fraction,
                truncation_bias_bound: stop_bound + mean_events * cap_hit,
                limit_value: None,
                limit_gap: None,
                flagged: abort_fraction > ABORT_FLAG_FRACTION,
            });
        }
    }
    Ok(out)
}

/// `E[s^{X(t)}]` or `E[s^{Y(t)}]` from `n` replicates, `0 <= s < 1`.
pub fn estimate_pgf(
    process: Process,
    t: f64,
    s: f64,
    n: u64,
    cfg: &SimConfig,
    workers: usize,
) -> Result<EstimateReport> {
    Ok(estimate_pgf_grid(process, &[t], &[s], n, cfg, workers)?.remove(0))
}

/// `Psi(t, lambda)` estimates for each `lambda`, all from the same `n`
/// replicates.
pub fn estimate_laplace_grid(
    case: &RegimeLimit,
    t: f64,
    lambdas: &[f64],
    n: u64,
    cfg: &SimConfig,
    engine: LaplaceEngine,
    workers: usize,
) -> Result<Vec<EstimateReport>> {
    estimate_laplace_grid_against(case, t, lambdas, n, cfg, engine, workers, &cfg.params)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_laplace_grid_against(
    case: &RegimeLimit,
    t: f64,
    lambdas: &[f64],
    n: u64,
    cfg: &SimConfig,
    engine: LaplaceEngine,
    workers: usize,
    analytic: &ModelParams,
) -> Result<Vec<EstimateReport>> {
    // Validates the case against the parameters and t > 0.
    let z = normalization_z(t, case.normalization_exponent, &cfg.params)?;
    RegimeLimit::new(case.case_id, &cfg.params)?;
    for &l in lambdas {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(domain("lambda", l, "lambda >= 0"));
        }
    }
    let ws: Vec<f64> = lambdas.iter().map(|&l| -(-l * z).exp_m1()).collect();
    let (values, bounds, abort_fraction) = match engine {
        LaplaceEngine::EventDriven => event_driven_laplace(t, &ws, n, cfg, workers)?,
        LaplaceEngine::Cohort { batch_cap } => cohort_laplace(t, &ws, n, cfg, batch_cap, workers)?,
    };
    let mut out = Vec::with_capacity(lambdas.len());
    for (j, &l) in lambdas.iter().enumerate() {
        let column: Vec<f64> = values.iter().map(|v| v[j]).collect();
        let (est, se) = mean_and_se(&column);
        let analytic_value = finite_laplace(t, l, &RegimeLimit::new(case.case_id, analytic)?, analytic)?;
        let limit = match limit_laplace(l, &RegimeLimit::new(case.case_id, analytic)?, analytic) {
            Ok(v) => Some(v),
            Err(Error::UndefinedLimit) => None,
            Err(e) => return Err(e),
        };
        out.push(EstimateReport {
            label: format!("laplace_mc[case{}]", case.case_id),
            point: format!("t={t};lambda={l}"),
            mc_estimate: est,
            std_error: se,
            analytic_value,
            z_score: z_score(est, analytic_value, se),
            n_replicates: values.len() as u64,
            abort_fraction,
            truncation_bias_bound: bounds[j],
            limit_value: limit,
            limit_gap: limit.map(|v| (analytic_value - v).abs()),
            flagged: abort_fraction > ABORT_FLAG_FRACTION,
        });
    }
    Ok(out)
}

/// `E[exp(-lambda z(t) Y(t))]` from `n` replicates.
pub fn estimate_laplace(
    case: &RegimeLimit,
    t: f64,
    lambda: f64,
    n: u64,
    cfg: &SimConfig,
    engine: LaplaceEngine,
    workers: usize,
) -> Result<EstimateReport> {
    Ok(estimate_laplace_grid(case, t, &[lambda], n, cfg, engine, workers)?.remove(0))
}

type LaplaceSamples = (Vec<Vec<f64>>, Vec<f64>, f64);

fn event_driven_laplace(t: f64, ws: &[f64], n: u64, cfg: &SimConfig, workers: usize) -> Result<LaplaceSamples> {
    if ws.iter().all(|&w| w == 0.0) {
        // Every summand is exactly 1.
        return Ok((vec![vec![1.0; ws.len()]; n as usize], vec![0.0; ws.len()], 0.0));
    }
    let mut run_cfg = cfg.clone().with_horizon(t);
    let w_min = ws.iter().copied().filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    if w_min.is_finite() {
        if let Some(m) = saturation_level_w(t, w_min, &cfg.params, SATURATION_EPS) {
            run_cfg.saturation = Some(run_cfg.saturation.map_or(m, |c| c.min(m)));
        }
    }
    let runs = run_replicates_checkpoints(&run_cfg, Process::Y, n, workers, &[t])?;
    let states: Vec<PopulationState> = runs.into_iter().map(|r| r[0]).collect();
    let nn = states.len();
    let values = states
        .iter()
        .map(|st| {
            ws.iter()
                .map(|&w| {
                    if st.incomplete() {
                        0.0
                    } else {
                        (st.alive as f64 * (-w).ln_1p()).exp()
                    }
                })
                .collect()
        })
        .collect();
    let cap_hit = cap_hit_probability(&run_cfg)?;
    let mean_events = mean(states.iter().map(|s| s.events_processed as f64), nn);
    let bounds = ws
        .iter()
        .map(|&w| mean(states.iter().map(|st| stopped_bound(st, t, w, &cfg.params)), nn) + mean_events * cap_hit)
        .collect();
    let aborted = states.iter().filter(|s| s.aborted).count();
    let abort_fraction = if nn == 0 { 0.0 } else { aborted as f64 / nn as f64 };
    Ok((values, bounds, abort_fraction))
}

/// One replicate of the cohort engine: for each `w`, the conditional
/// expectation `exp(sum_i I_i ln F(t - tau_i, 1 - w))` and the bound on
/// the error caused by truncated batches.
fn cohort_replicate(
    rng: &mut RngStream,
    t: f64,
    ws: &[f64],
    p: &ModelParams,
    batches: &SibuyaLaw,
    batch_cap: u64,
) -> (Vec<f64>, Vec<f64>) {
    let arrivals = sample_poisson(rng, p.theta() * t);
    let scale: Vec<f64> = ws.iter().map(|&w| w.powf(p.beta()) / p.a()).collect();
    let inv_beta = 1.0 / p.beta();
    let mut log_value = vec![0.0; ws.len()];
    let mut trunc = vec![0.0; ws.len()];
    for _ in 0..arrivals {
        let age = t * rng.unit_positive();
        let d = batches.sample(rng, batch_cap);
        let size = d.value as f64;
        for (j, &w) in ws.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let g = (-(age * scale[j]).ln_1p() * inv_beta).exp();
            let lf = (-w * g).ln_1p();
            log_value[j] += size * lf;
            if d.truncated {
                trunc[j] += (size * lf).exp();
            }
        }
    }
    (log_value.into_iter().map(f64::exp).collect(), trunc)
}

fn cohort_laplace(
    t: f64,
    ws: &[f64],
    n: u64,
    cfg: &SimConfig,
    batch_cap: u64,
    workers: usize,
) -> Result<LaplaceSamples> {
    if batch_cap == 0 {
        return Err(domain("batch_cap", 0.0, "cap >= 1"));
    }
    let batches = SibuyaLaw::new(cfg.params.gamma())?;
    let per: Vec<(Vec<f64>, Vec<f64>)> = parallel_map(n, workers, |id| {
        let mut rng = RngStream::new(cfg.seed, id);
        cohort_replicate(&mut rng, t, ws, &cfg.params, &batches, batch_cap)
    });
    let nn = per.len();
    let bounds = (0..ws.len()).map(|j| mean(per.iter().map(|(_, b)| b[j]), nn)).collect();
    let values = per.into_iter().map(|(v, _)| v).collect();
    Ok((values, bounds, 0.0))
}
