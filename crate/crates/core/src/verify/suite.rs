//! The verification suite: oracle comparisons for every closed form plus
//! Monte Carlo checks, assembled into a deterministic report.

use std::io::Write;

use serde::Serialize;

use crate::analytic::{
    b_function, extinction_prob_x, extinction_prob_y, factorial_identity_check, factorial_identity_middle,
    finite_laplace, infinitesimal_f, infinitesimal_f_via_a, infinitesimal_phi, limit_laplace, normalization_z,
    pde_residual, pgf_f, pgf_phi, pgf_phi_coefficients_linear, pgf_phi_series_auto, LimitKind, ModelParams,
    RegimeLimit,
};
use crate::distributions::{OffspringLaw, SibuyaLaw};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::simulator::{Process, SimConfig, DEFAULT_BATCH_CAP, DEFAULT_EVENT_CAP, DEFAULT_POPULATION_CAP};

use super::estimate::{estimate_laplace_grid_against, estimate_pgf_grid_against, EstimateReport, LaplaceEngine};
use super::oracle::{ode_oracle_f, quad_oracle_phi, OracleReport};

pub const ODE_TOLERANCE: f64 = 1e-10;
pub const QUAD_TOLERANCE: f64 = 1e-9;
pub const PDE_TOLERANCE: f64 = 1e-6;
pub const PDE_STEP: f64 = 1e-4;
pub const Z_THRESHOLD: f64 = 4.0;
pub const EXCEEDANCE_BUDGET: f64 = 0.02;

/// Closed forms that must each appear in at least one oracle row.
pub const CLOSED_FORM_LABELS: &[&str] = &[
    "pgf_F",
    "b_function",
    "pgf_Phi",
    "pgf_phi_series",
    "factorial_identity",
    "extinction_prob_X",
    "extinction_prob_Y",
    "infinitesimal_f",
    "infinitesimal_f_via_a",
    "infinitesimal_phi",
    "pde_residual",
    "normalization_z",
    "finite_laplace",
    "limit_laplace",
    "pgf_phi_coefficients_linear",
];

/// Interior points for the PDE residual rows.
const PDE_TIMES: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
const PDE_S: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Time multiple of `A` where the finite-t transform stands in for its limit.
const FAR_MULTIPLE: f64 = 1e12;
const FAR_TOLERANCE: f64 = 1e-3;

/// What to check. Oracle rows are indexed by `t_grid` and `s_grid`; an
/// empty `t_grid` or an empty `parameter_sets` gives an empty report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteSpec {
    pub seed: u64,
    pub workers: usize,
    pub parameter_sets: Vec<ModelParams>,
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// Monte Carlo p.g.f. rows use the `t_grid` points up to this time.
    pub mc_max_time: f64,
    pub pgf_replicates: u64,
    /// `t / A` for the proper limit cases (1 and 2).
    pub laplace_multiple: f64,
    pub laplace_replicates: u64,
    /// `t / A` for the degenerate cases (3, 4 and 5).
    pub degenerate_multiple: f64,
    pub degenerate_replicates: u64,
    /// Case 3 needs the estimate below this; cases 4 and 5 above one minus it.
    pub degenerate_threshold: f64,
    pub batch_cap: u64,
    pub population_cap: u64,
    pub event_cap: u64,
    /// Scales `A` in the closed forms only, leaving simulations and oracles
    /// untouched. Used to confirm the suite detects a wrong formula.
    pub perturb_a: Option<f64>,
}

impl SuiteSpec {
    /// `K = theta = 1`, `beta = 0.5` and `gamma` in `{0.25, 0.5, 0.75}`.
    pub fn default_parameter_sets() -> Vec<ModelParams> {
        [0.25, 0.5, 0.75]
            .iter()
            .map(|&g| ModelParams::new(1.0, 0.5, g, 1.0).expect("valid defaults"))
            .collect()
    }

    pub fn default_suite(seed: u64) -> Self {
        Self {
            seed,
            workers: 1,
            parameter_sets: Self::default_parameter_sets(),
            t_grid: vec![0.1, 1.0, 10.0, 100.0],
            s_grid: vec![0.0, 0.25, 0.5, 0.75, 0.95],
            lambda_grid: vec![0.5, 1.0, 2.0],
            mc_max_time: 10.0,
            pgf_replicates: 20_000,
            laplace_multiple: 1e3,
            laplace_replicates: 20_000,
            degenerate_multiple: 1e4,
            degenerate_replicates: 2_000,
            degenerate_threshold: 0.05,
            batch_cap: DEFAULT_BATCH_CAP,
            population_cap: DEFAULT_POPULATION_CAP,
            event_cap: DEFAULT_EVENT_CAP,
            perturb_a: None,
        }
    }

    pub fn empty(seed: u64) -> Self {
        Self {
            parameter_sets: Vec::new(),
            t_grid: Vec::new(),
            ..Self::default_suite(seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Oracle(OracleReport),
    Estimate(EstimateReport),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SuiteReport {
    pub records: Vec<Record>,
}

/// Label with any `[...]` qualifier removed.
fn base_label(label: &str) -> &str {
    label.split('[').next().unwrap_or(label)
}

impl SuiteReport {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn oracles(&self) -> impl Iterator<Item = &OracleReport> {
        self.records.iter().filter_map(|r| match r {
            Record::Oracle(o) => Some(o),
            _ => None,
        })
    }

    pub fn estimates(&self) -> impl Iterator<Item = &EstimateReport> {
        self.records.iter().filter_map(|r| match r {
            Record::Estimate(e) => Some(e),
            _ => None,
        })
    }

    pub fn oracle_failures(&self) -> Vec<&OracleReport> {
        self.oracles().filter(|o| !o.pass).collect()
    }

    /// Fraction of Monte Carlo rows with `|z| > 4`.
    pub fn exceedance_fraction(&self) -> f64 {
        let (mut n, mut bad) = (0usize, 0usize);
        for e in self.estimates() {
            n += 1;
            bad += !e.within(Z_THRESHOLD) as usize;
        }
        if n == 0 {
            0.0
        } else {
            bad as f64 / n as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.oracle_failures().is_empty() && self.exceedance_fraction() <= EXCEEDANCE_BUDGET
    }

    /// Entries of [`CLOSED_FORM_LABELS`] without an oracle row.
    pub fn missing_labels(&self) -> Vec<&'static str> {
        CLOSED_FORM_LABELS
            .iter()
            .copied()
            .filter(|l| !self.oracles().any(|o| base_label(&o.label) == *l))
            .collect()
    }

    /// Limit cases that have at least one row.
    pub fn covered_cases(&self) -> Vec<u8> {
        let mut cases: Vec<u8> = (1..=5)
            .filter(|c| {
                let tag = format!("[case{c}]");
                self.records.iter().any(|r| match r {
                    Record::Oracle(o) => o.label.contains(&tag),
                    Record::Estimate(e) => e.label.contains(&tag),
                })
            })
            .collect();
        cases.dedup();
        cases
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "kind,label,point,value,reference,abs_diff,tolerance,std_error,z_score,n_replicates,\
             abort_fraction,truncation_bias_bound,limit_value,limit_gap,pass"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.records {
            match r {
                Record::Oracle(o) => writeln!(
                    out,
                    "oracle,{},{},{:?},{:?},{:?},{:?},,,,,,,,{}",
                    o.label, o.point, o.closed_form, o.oracle_value, o.abs_diff, o.tolerance, o.pass
                )?,
                Record::Estimate(e) => writeln!(
                    out,
                    "estimate,{},{},{:?},{:?},{:?},,{:?},{:?},{},{:?},{:?},{},{},{}",
                    e.label,
                    e.point,
                    e.mc_estimate,
                    e.analytic_value,
                    (e.mc_estimate - e.analytic_value).abs(),
                    e.std_error,
                    e.z_score,
                    e.n_replicates,
                    e.abort_fraction,
                    e.truncation_bias_bound,
                    opt(e.limit_value),
                    opt(e.limit_gap),
                    e.within(Z_THRESHOLD)
                )?,
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

struct Builder<'a> {
    spec: &'a SuiteSpec,
    records: Vec<Record>,
    items: u64,
}

impl Builder<'_> {
    fn oracle(&mut self, label: String, point: String, closed: f64, oracle: f64, tol: f64) {
        self.records
            .push(Record::Oracle(OracleReport::new(label, point, closed, oracle, tol)));
    }

    fn next_seed(&mut self) -> u64 {
        self.items += 1;
        derive_seed(self.spec.seed, self.items)
    }

    fn sim_config(&mut self, params: ModelParams) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(params, 0.0, self.next_seed())?;
        cfg.batch_cap = self.spec.batch_cap;
        cfg.population_cap = self.spec.population_cap;
        cfg.event_cap = self.spec.event_cap;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn pair(p: &ModelParams) -> String {
    format!("K={};beta={};gamma={};theta={}", p.k(), p.beta(), p.gamma(), p.theta())
}

/// `K (h(s) - s)` summed from the offspring pmf.
fn offspring_generator_series(s: f64, p: &ModelParams) -> Result<f64> {
    let law = OffspringLaw::new(p.beta())?;
    Ok(p.k() * (power_series(s, |k| law.pmf(k), 0) - s))
}

/// `theta (1 - g(s))` summed from the Sibuya pmf.
fn immigration_generator_series(s: f64, p: &ModelParams) -> Result<f64> {
    let law = SibuyaLaw::new(p.gamma())?;
    Ok(p.theta() * (1.0 - power_series(s, |k| law.pmf(k), 1)))
}

fn power_series(s: f64, pmf: impl Fn(u64) -> f64, start: u64) -> f64 {
    if s >= 1.0 {
        return 1.0;
    }
    // Terms past n are below s^n, which is under 1e-17 here.
    let n = if s <= 0.0 {
        1
    } else {
        ((40.0 / -s.ln()).ceil() as u64).clamp(1, 1 << 20)
    };
    let mut sum = 0.0;
    let mut power = if start == 0 { 1.0 } else { s };
    for k in start..=n {
        sum += pmf(k) * power;
        power *= s;
    }
    sum
}

fn negative_binomial(t: f64, p: &ModelParams, n: usize) -> Vec<f64> {
    let a = (1.0 + p.beta()) / (p.k() * p.beta());
    let r = p.theta() * a;
    let q = 1.0 / (1.0 + t / a);
    let mut out = Vec::with_capacity(n);
    let mut v = q.powf(r);
    for k in 0..n {
        if k > 0 {
            v *= (r + k as f64 - 1.0) / k as f64 * (1.0 - q);
        }
        out.push(v);
    }
    out
}

fn oracle_rows(b: &mut Builder, truth: &ModelParams, ap: &ModelParams) -> Result<()> {
    let spec = b.spec;
    let tag = pair(truth);
    let a_true = (1.0 + truth.beta()) / (truth.k() * truth.beta());
    for &t in &spec.t_grid {
        for &s in &spec.s_grid {
            let pt = format!("{tag};t={t};s={s}");
            let ode = ode_oracle_f(t, s, truth, ODE_TOLERANCE * 1e-2)?;
            b.oracle("pgf_F".into(), pt.clone(), pgf_f(t, s, ap)?, ode, ODE_TOLERANCE);
            let quad = quad_oracle_phi(t, s, truth, QUAD_TOLERANCE * 1e-3)?;
            b.oracle("pgf_Phi".into(), pt.clone(), pgf_phi(t, s, ap)?, quad, QUAD_TOLERANCE);
            if s < 1.0 {
                // (1 - F)/(1 - s) = B^(-1/beta)
                let b_ode = ((1.0 - ode) / (1.0 - s)).powf(-truth.beta());
                let b_cf = b_function(t, s, ap)?;
                b.oracle("b_function".into(), pt.clone(), b_cf, b_ode, 1e-9 * b_ode.max(1.0));
            }
            let x = t * (1.0 - s).powf(truth.beta()) / a_true;
            if x <= 0.9 {
                let series = pgf_phi_series_auto(t, s, ap).map(|v| v.value).unwrap_or(f64::NAN);
                b.oracle("pgf_phi_series".into(), pt.clone(), series, quad, QUAD_TOLERANCE);
            }
            if s == 0.0 {
                b.oracle(
                    "extinction_prob_X".into(),
                    pt.clone(),
                    extinction_prob_x(t, ap)?,
                    ode,
                    ODE_TOLERANCE,
                );
                b.oracle(
                    "extinction_prob_Y".into(),
                    pt,
                    extinction_prob_y(t, ap)?,
                    quad,
                    QUAD_TOLERANCE,
                );
            }
        }
        if t > 0.0 {
            for exponent in [truth.beta(), truth.gamma()] {
                let pt = format!("{tag};t={t};exponent={exponent}");
                let oracle = (a_true / t).powf(1.0 / exponent);
                b.oracle(
                    "normalization_z".into(),
                    pt,
                    normalization_z(t, exponent, ap)?,
                    oracle,
                    1e-12 * oracle,
                );
            }
        }
    }
    for &s in &spec.s_grid {
        let pt = format!("{tag};s={s}");
        let f_series = offspring_generator_series(s, truth)?;
        b.oracle(
            "infinitesimal_f".into(),
            pt.clone(),
            infinitesimal_f(s, ap)?,
            f_series,
            1e-12,
        );
        b.oracle(
            "infinitesimal_f_via_a".into(),
            pt.clone(),
            infinitesimal_f_via_a(s, ap)?,
            f_series,
            1e-12,
        );
        let phi_series = immigration_generator_series(s, truth)?;
        b.oracle(
            "infinitesimal_phi".into(),
            pt,
            infinitesimal_phi(s, ap)?,
            phi_series,
            1e-12,
        );
    }
    for j in 1..=10u32 {
        let (lhs, rhs) = factorial_identity_check(ap.delta(), j);
        let middle = factorial_identity_middle(ap.delta(), j);
        let tol = 1e-12 * lhs.abs().max(1.0);
        let pt = format!("{tag};j={j}");
        b.oracle("factorial_identity".into(), pt.clone(), lhs, rhs, tol);
        b.oracle("factorial_identity[middle]".into(), pt, lhs, middle, tol);
    }
    for &t in &PDE_TIMES {
        for &s in &PDE_S {
            let pt = format!("{tag};t={t};s={s};step={PDE_STEP}");
            let r = pde_residual(t, s, ap, PDE_STEP)?;
            b.oracle("pde_residual".into(), pt, r, 0.0, PDE_TOLERANCE);
        }
    }
    let nb = ModelParams::new(truth.k(), 1.0, 1.0, truth.theta())?;
    let nb_ap = if let Some(f) = spec.perturb_a {
        nb.with_scaled_a(f)
    } else {
        nb
    };
    for &t in &spec.t_grid {
        let coefs = pgf_phi_coefficients_linear(t, &nb_ap, 20)?;
        for (k, (c, o)) in coefs.iter().zip(negative_binomial(t, &nb, 20)).enumerate() {
            let pt = format!("{};t={t};k={k}", pair(&nb));
            b.oracle("pgf_phi_coefficients_linear".into(), pt, *c, o, 1e-10);
        }
    }
    for case in RegimeLimit::applicable(truth) {
        let c = case.case_id;
        let case_ap = RegimeLimit::new(c, ap)?;
        let t = 10.0 * a_true;
        let far = FAR_MULTIPLE * a_true;
        for &l in &spec.lambda_grid {
            let pt = format!("{tag};t={t};lambda={l}");
            let zt = (a_true / t).powf(1.0 / case.normalization_exponent);
            let quad = quad_oracle_phi(t, (-l * zt).exp(), truth, QUAD_TOLERANCE * 1e-3)?;
            let fin = finite_laplace(t, l, &case_ap, ap)?;
            b.oracle(format!("finite_laplace[case{c}]"), pt, fin, quad, QUAD_TOLERANCE);
            match limit_laplace(l, &case_ap, ap) {
                Ok(lim) => {
                    let far_value = finite_laplace(far, l, &case, truth)?;
                    let pt = format!("{tag};t={far};lambda={l}");
                    b.oracle(format!("limit_laplace[case{c}]"), pt, lim, far_value, FAR_TOLERANCE);
                }
                Err(Error::UndefinedLimit) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn monte_carlo_rows(b: &mut Builder, truth: &ModelParams, ap: &ModelParams) -> Result<()> {
    let spec = b.spec;
    let times: Vec<f64> = spec.t_grid.iter().copied().filter(|&t| t <= spec.mc_max_time).collect();
    let s_values: Vec<f64> = spec.s_grid.iter().copied().filter(|&s| s < 1.0).collect();
    let tag = pair(truth);
    if spec.pgf_replicates > 0 {
        for process in [Process::X, Process::Y] {
            let cfg = b.sim_config(*truth)?;
            let rows =
                estimate_pgf_grid_against(process, &times, &s_values, spec.pgf_replicates, &cfg, spec.workers, ap)?;
            for mut r in rows {
                r.point = format!("{tag};{}", r.point);
                b.records.push(Record::Estimate(r));
            }
        }
    }
    let lambdas: Vec<f64> = spec.lambda_grid.iter().copied().filter(|&l| l > 0.0).collect();
    if lambdas.is_empty() {
        return Ok(());
    }
    let a_true = (1.0 + truth.beta()) / (truth.k() * truth.beta());
    for case in RegimeLimit::applicable(truth) {
        let proper = matches!(case.limit_kind, LimitKind::PositiveLinnik | LimitKind::OneSidedStable);
        let (multiple, n) = if proper {
            (spec.laplace_multiple, spec.laplace_replicates)
        } else {
            (spec.degenerate_multiple, spec.degenerate_replicates)
        };
        if n == 0 {
            continue;
        }
        let t = multiple * a_true;
        let cfg = b.sim_config(*truth)?;
        let rows =
            estimate_laplace_grid_against(&case, t, &lambdas, n, &cfg, LaplaceEngine::cohort(), spec.workers, ap)?;
        for mut r in rows {
            r.point = format!("{tag};{}", r.point);
            if proper {
                b.records.push(Record::Estimate(r));
            } else {
                // Degenerate limits are checked one-sidedly; far in the tail
                // the finite-t value can sit below what the sample resolves.
                let limit = if case.limit_kind == LimitKind::DegenerateZero {
                    0.0
                } else {
                    1.0
                };
                b.oracle(
                    format!("limit_bound[case{}]", case.case_id),
                    r.point,
                    r.mc_estimate,
                    limit,
                    spec.degenerate_threshold,
                );
            }
        }
    }
    Ok(())
}

/// Runs every check in `spec`. Deterministic for a given spec, whatever
/// `spec.workers` is.
pub fn run_verification_suite(spec: &SuiteSpec) -> Result<SuiteReport> {
    let mut b = Builder {
        spec,
        records: Vec::new(),
        items: 0,
    };
    if spec.t_grid.is_empty() {
        return Ok(SuiteReport::default());
    }
    for truth in &spec.parameter_sets {
        let ap = match spec.perturb_a {
            Some(f) => truth.with_scaled_a(f),
            None => *truth,
        };
        oracle_rows(&mut b, truth, &ap)?;
    }
    for truth in &spec.parameter_sets {
        let ap = match spec.perturb_a {
            Some(f) => truth.with_scaled_a(f),
            None => *truth,
        };
        monte_carlo_rows(&mut b, truth, &ap)?;
    }
    Ok(SuiteReport { records: b.records })
}
