//! Exact event-driven simulation of the single-ancestor process `X(t)` and
//! the immigration-driven process `Y(t)`.
//!
//! Only the head count is tracked. Lifetimes are i.i.d. exponential, so with
//! `n` particles alive the next death comes after an `Exponential(n K)` wait
//! and the identity of the dying particle is irrelevant. For `Y` a competing
//! `Exponential(theta)` clock brings Sibuya-sized batches.
//!
//! Heavy tails are handled by three explicit caps. A single offspring or
//! batch draw above `batch_cap` is replaced by `batch_cap` and counted as a
//! truncation. A population above `population_cap` or an event count
//! reaching `event_cap` stops the run with `aborted` set. Estimators may also
//! set a `saturation` level; a run that reaches it stops early with
//! `saturated` set, and the caller accounts for the bounded remainder.

use std::io::Write;
use std::thread;

use serde::Serialize;

use crate::analytic::{survival_complement, ModelParams};
use crate::distributions::{OffspringLaw, SibuyaLaw};
use crate::error::{domain, Result};
use crate::rng::RngStream;

pub const DEFAULT_BATCH_CAP: u64 = 1_000_000;
pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;
pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Process {
    /// One ancestor, no immigration.
    X,
    /// No ancestors, Poisson batches of immigrants.
    Y,
}

impl std::fmt::Display for Process {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Process::X => "X",
            Process::Y => "Y",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub horizon: f64,
    pub batch_cap: u64,
    pub population_cap: u64,
    pub event_cap: u64,
    pub seed: u64,
    pub saturation: Option<u64>,
}

impl SimConfig {
    /// Default caps, no saturation.
    pub fn new(params: ModelParams, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            params,
            horizon,
            batch_cap: DEFAULT_BATCH_CAP,
            population_cap: DEFAULT_POPULATION_CAP,
            event_cap: DEFAULT_EVENT_CAP,
            seed,
            saturation: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(domain("horizon", self.horizon, "0 <= horizon < infinity"));
        }
        for (name, v) in [
            ("batch_cap", self.batch_cap),
            ("population_cap", self.population_cap),
            ("event_cap", self.event_cap),
        ] {
            if v == 0 {
                return Err(domain(name, 0.0, "cap >= 1"));
            }
        }
        if self.saturation == Some(0) {
            return Err(domain("saturation", 0.0, "saturation >= 1"));
        }
        Ok(())
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }
}

/// Snapshot of a run. Counters are cumulative from time 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PopulationState {
    pub alive: u64,
    pub clock: f64,
    pub events_processed: u64,
    pub deaths: u64,
    pub immigrations: u64,
    pub truncations: u64,
    pub aborted: bool,
    pub saturated: bool,
    /// Largest head count seen so far.
    pub peak: u64,
}

impl PopulationState {
    fn initial(alive: u64) -> Self {
        Self {
            alive,
            clock: 0.0,
            events_processed: 0,
            deaths: 0,
            immigrations: 0,
            truncations: 0,
            aborted: false,
            saturated: false,
            peak: alive,
        }
    }

    /// Stopped before reaching the requested time.
    pub fn incomplete(&self) -> bool {
        self.aborted || self.saturated
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventType {
    Start,
    Death,
    Immigration,
    End,
}

impl EventType {
    fn as_str(self) -> &'static str {
        match self {
            EventType::Start => "start",
            EventType::Death => "death",
            EventType::Immigration => "immigration",
            EventType::End => "end",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub clock: f64,
    pub alive: u64,
    pub event: EventType,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub terminal: PopulationState,
}

impl Trajectory {
    /// `clock,alive,event_type` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "clock,alive,event_type")?;
        for p in &self.points {
            writeln!(out, "{:?},{},{}", p.clock, p.alive, p.event.as_str())?;
        }
        Ok(())
    }
}

struct Laws {
    offspring: OffspringLaw,
    batches: SibuyaLaw,
}

impl Laws {
    fn new(p: &ModelParams) -> Result<Self> {
        Ok(Self {
            offspring: OffspringLaw::new(p.beta())?,
            batches: SibuyaLaw::new(p.gamma())?,
        })
    }
}

fn check_times(cfg: &SimConfig, times: &[f64]) -> Result<()> {
    cfg.validate()?;
    let mut prev = 0.0;
    for &t in times {
        if !(t >= prev && t <= cfg.horizon) {
            return Err(domain("checkpoint", t, "ascending times within [0, horizon]"));
        }
        prev = t;
    }
    Ok(())
}

fn run(
    cfg: &SimConfig,
    laws: &Laws,
    process: Process,
    rng: &mut RngStream,
    times: &[f64],
    mut trace: Option<&mut Vec<TrajectoryPoint>>,
) -> Vec<PopulationState> {
    let mut out = Vec::with_capacity(times.len());
    let Some(&end) = times.last() else {
        return out;
    };
    let (initial, imm_rate) = match process {
        Process::X => (1, 0.0),
        Process::Y => (0, cfg.params.theta()),
    };
    let k = cfg.params.k();
    let mut st = PopulationState::initial(initial);
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(TrajectoryPoint {
            clock: 0.0,
            alive: st.alive,
            event: EventType::Start,
        });
    }
    let mut next = 0;
    loop {
        let death_rate = st.alive as f64 * k;
        let rate = death_rate + imm_rate;
        let t_next = if rate > 0.0 {
            st.clock + rng.exponential(rate)
        } else {
            f64::INFINITY
        };
        while next < times.len() && times[next] < t_next {
            out.push(PopulationState {
                clock: times[next],
                ..st
            });
            next += 1;
        }
        if next == times.len() {
            st.clock = end;
            break;
        }
        st.clock = t_next;
        let event = if rng.unit() * rate < death_rate {
            let d = laws.offspring.sample(rng, cfg.batch_cap);
            st.truncations += d.truncated as u64;
            st.alive = (st.alive - 1).saturating_add(d.value);
            st.deaths += 1;
            EventType::Death
        } else {
            let d = laws.batches.sample(rng, cfg.batch_cap);
            st.truncations += d.truncated as u64;
            st.alive = st.alive.saturating_add(d.value);
            st.immigrations += 1;
            EventType::Immigration
        };
        st.events_processed += 1;
        st.peak = st.peak.max(st.alive);
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(TrajectoryPoint {
                clock: st.clock,
                alive: st.alive,
                event,
            });
        }
        if cfg.saturation.is_some_and(|m| st.alive >= m) {
            st.saturated = true;
        } else if st.alive > cfg.population_cap || st.events_processed >= cfg.event_cap {
            st.aborted = true;
        }
        if st.incomplete() {
            // The remaining checkpoints keep the stopping time as their clock.
            out.extend(std::iter::repeat_n(st, times.len() - next));
            break;
        }
    }
    if let Some(tr) = trace {
        if !st.incomplete() && tr.last().is_some_and(|p| p.clock < st.clock) {
            tr.push(TrajectoryPoint {
                clock: st.clock,
                alive: st.alive,
                event: EventType::End,
            });
        }
    }
    out
}

/// Runs replicate `stream_id` and reports its state at each of `times`
/// (ascending, within the horizon). Checkpoints after an abort or
/// saturation repeat the stopping state, whose clock is the stopping time.
pub fn simulate_checkpoints(
    cfg: &SimConfig,
    process: Process,
    stream_id: u64,
    times: &[f64],
) -> Result<Vec<PopulationState>> {
    check_times(cfg, times)?;
    let laws = Laws::new(&cfg.params)?;
    let mut rng = RngStream::new(cfg.seed, stream_id);
    Ok(run(cfg, &laws, process, &mut rng, times, None))
}

/// State at the horizon (or at the stopping time when aborted).
pub fn simulate(cfg: &SimConfig, process: Process, stream_id: u64) -> Result<PopulationState> {
    Ok(simulate_checkpoints(cfg, process, stream_id, &[cfg.horizon])?[0])
}

pub fn simulate_x(cfg: &SimConfig, stream_id: u64) -> Result<PopulationState> {
    simulate(cfg, Process::X, stream_id)
}

pub fn simulate_y(cfg: &SimConfig, stream_id: u64) -> Result<PopulationState> {
    simulate(cfg, Process::Y, stream_id)
}

/// Same run as [`simulate`] with every event recorded.
pub fn simulate_trajectory(cfg: &SimConfig, process: Process, stream_id: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let laws = Laws::new(&cfg.params)?;
    let mut rng = RngStream::new(cfg.seed, stream_id);
    let mut points = Vec::new();
    let terminal = run(cfg, &laws, process, &mut rng, &[cfg.horizon], Some(&mut points))[0];
    Ok(Trajectory { points, terminal })
}

/// Evaluates `f(0..n)` on `workers` threads, each taking a contiguous block
/// of indices, and returns the results in index order.
pub fn parallel_map<T, F>(n: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let workers = (workers.max(1) as u64).min(n.max(1));
    if workers == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(workers);
    let f = &f;
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * chunk).min(n);
                let hi = ((w + 1) * chunk).min(n);
                scope.spawn(move || (lo..hi).map(f).collect::<Vec<T>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("replicate worker panicked"))
            .collect()
    })
}

/// Replicates `0..n` with checkpoints; entry `i` belongs to stream `i`.
pub fn run_replicates_checkpoints(
    cfg: &SimConfig,
    process: Process,
    n: u64,
    workers: usize,
    times: &[f64],
) -> Result<Vec<Vec<PopulationState>>> {
    check_times(cfg, times)?;
    let laws = Laws::new(&cfg.params)?;
    Ok(parallel_map(n, workers, |id| {
        let mut rng = RngStream::new(cfg.seed, id);
        run(cfg, &laws, process, &mut rng, times, None)
    }))
}

/// Terminal states of replicates `0..n`; identical for every worker count.
pub fn run_replicates(cfg: &SimConfig, process: Process, n: u64, workers: usize) -> Result<Vec<PopulationState>> {
    Ok(run_replicates_checkpoints(cfg, process, n, workers, &[cfg.horizon])?
        .into_iter()
        .map(|v| v[0])
        .collect())
}

/// Aggregate abort and truncation statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub replicates: u64,
    pub aborted: u64,
    pub saturated: u64,
    pub truncations: u64,
    pub events: u64,
}

impl RunSummary {
    pub fn of(states: &[PopulationState]) -> Self {
        let mut s = Self {
            replicates: states.len() as u64,
            ..Self::default()
        };
        for st in states {
            s.aborted += st.aborted as u64;
            s.saturated += st.saturated as u64;
            s.truncations += st.truncations;
            s.events += st.events_processed;
        }
        s
    }

    pub fn abort_fraction(&self) -> f64 {
        if self.replicates == 0 {
            0.0
        } else {
            self.aborted as f64 / self.replicates as f64
        }
    }
}

/// Smallest `M` with `F(t, s)^M <= eps`. Once `M` particles are alive at
/// any time before `t`, their descendants alone keep `E[s^{Y(t)}]` below
/// `eps`. Returns `None` at `s = 1`, where no such level exists.
pub fn saturation_level(t: f64, s: f64, params: &ModelParams, eps: f64) -> Option<u64> {
    saturation_level_w(t, 1.0 - s, params, eps)
}

/// [`saturation_level`] in terms of `w = 1 - s`.
pub fn saturation_level_w(t: f64, w: f64, params: &ModelParams, eps: f64) -> Option<u64> {
    let ln_f = (-survival_complement(t, w, params)).ln_1p();
    if ln_f >= 0.0 {
        return None;
    }
    let m = (eps.ln() / ln_f).ceil();
    Some(if m >= u64::MAX as f64 {
        u64::MAX
    } else {
        (m as u64).max(1)
    })
}
