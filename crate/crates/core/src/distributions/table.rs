use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use crate::error::Result;
use crate::rng::RngStream;
use crate::special::ln_gamma_ratio_large;

use super::{check_beta, check_gamma};

/// Entries resolved without touching the lock.
const HEAD: usize = 256;

/// Largest index held in memory. Beyond it survival values come from the
/// Gamma-ratio expansion anchored at the last exact entry.
pub const TABLE_LIMIT: u64 = 1 << 20;

const INITIAL_LEN: usize = 1 << 12;

type TableCache = HashMap<(u8, u64), Arc<PmfTable>>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Law {
    /// Batch sizes on `{1, 2, ...}` with p.g.f. `1 - (1-s)^gamma`.
    Sibuya { gamma: f64 },
    /// Offspring counts on `{0, 2, 3, ...}` with p.g.f. `s + (1-s)^(1+beta)/(1+beta)`.
    Offspring { beta: f64 },
}

impl Law {
    fn parameter(&self) -> f64 {
        match *self {
            Law::Sibuya { gamma } => gamma,
            Law::Offspring { beta } => beta,
        }
    }

    /// `a` such that `S(k)` is proportional to `Gamma(k + 1 + a) / Gamma(k + 1)`.
    fn gamma_shift(&self) -> f64 {
        match *self {
            Law::Sibuya { gamma } => -gamma,
            Law::Offspring { beta } => -1.0 - beta,
        }
    }

    fn first(&self) -> (f64, f64) {
        match *self {
            Law::Sibuya { .. } => (f64::NEG_INFINITY, 1.0),
            Law::Offspring { beta } => (-(1.0 + beta).ln(), beta / (1.0 + beta)),
        }
    }

    /// Entry `k >= 1` from entry `k - 1`: `(log_pmf, survival)`.
    fn step(&self, k: usize, prev_log_pmf: f64, prev_survival: f64) -> (f64, f64) {
        let kf = k as f64;
        match *self {
            Law::Sibuya { gamma } => {
                let lp = if k == 1 {
                    gamma.ln()
                } else {
                    prev_log_pmf + (kf - 1.0 - gamma).ln() - kf.ln()
                };
                (lp, prev_survival * (1.0 - gamma / kf))
            }
            Law::Offspring { beta } => match k {
                1 => (f64::NEG_INFINITY, prev_survival),
                2 => ((beta / 2.0).ln(), prev_survival * (1.0 - beta) / 2.0),
                _ => (
                    prev_log_pmf + (kf - 2.0 - beta).ln() - kf.ln(),
                    prev_survival * (kf - 1.0 - beta) / kf,
                ),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Draw {
    pub value: u64,
    pub truncated: bool,
}

struct TableData {
    log_pmf: Vec<f64>,
    cumulative: Vec<f64>,
    survival: Vec<f64>,
}

impl TableData {
    fn extend(&mut self, law: &Law, len: usize) {
        self.log_pmf.reserve(len.saturating_sub(self.log_pmf.len()));
        self.cumulative.reserve(len.saturating_sub(self.cumulative.len()));
        self.survival.reserve(len.saturating_sub(self.survival.len()));
        while self.survival.len() < len {
            let k = self.survival.len();
            let (lp, sv) = law.step(k, self.log_pmf[k - 1], self.survival[k - 1]);
            self.log_pmf.push(lp);
            self.survival.push(sv);
            self.cumulative.push(self.cumulative[k - 1] + lp.exp());
        }
    }
}

/// Exact pmf, cumulative and survival values of one law, extended on demand.
///
/// Sampling inverts the survival function: the draw is the smallest `k`
/// with `S(k) < V` for `V` uniform on `(0, 1]`. Survival values are carried
/// as products, which keeps far-tail probabilities at full relative
/// precision where `1 - cumulative` would have cancelled.
pub struct PmfTable {
    law: Law,
    head: [f64; HEAD],
    data: RwLock<TableData>,
}

impl PmfTable {
    pub fn new(law: Law) -> Result<Self> {
        match law {
            Law::Sibuya { gamma } => check_gamma(gamma)?,
            Law::Offspring { beta } => check_beta(beta)?,
        }
        let (lp0, s0) = law.first();
        let mut data = TableData {
            log_pmf: vec![lp0],
            cumulative: vec![lp0.exp()],
            survival: vec![s0],
        };
        data.extend(&law, INITIAL_LEN);
        let mut head = [0.0; HEAD];
        head.copy_from_slice(&data.survival[..HEAD]);
        Ok(Self {
            law,
            head,
            data: RwLock::new(data),
        })
    }

    pub fn sibuya(gamma: f64) -> Result<Self> {
        Self::new(Law::Sibuya { gamma })
    }

    pub fn offspring(beta: f64) -> Result<Self> {
        Self::new(Law::Offspring { beta })
    }

    /// Process-wide table for `law`, built once and shared.
    pub fn shared(law: Law) -> Result<Arc<PmfTable>> {
        static CACHE: OnceLock<Mutex<TableCache>> = OnceLock::new();
        let key = match law {
            Law::Sibuya { gamma } => (0, gamma.to_bits()),
            Law::Offspring { beta } => (1, beta.to_bits()),
        };
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().expect("table cache poisoned");
        if let Some(t) = map.get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(PmfTable::new(law)?);
        map.insert(key, Arc::clone(&table));
        Ok(table)
    }

    pub fn law(&self) -> Law {
        self.law
    }

    pub fn parameter(&self) -> f64 {
        self.law.parameter()
    }

    /// Number of exact entries currently held.
    pub fn len(&self) -> usize {
        self.data.read().expect("table lock poisoned").survival.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Makes entries `0..=k` resident (capped at `TABLE_LIMIT`).
    pub fn extend_to(&self, k: u64) {
        let want = (k.min(TABLE_LIMIT) + 1) as usize;
        if self.len() >= want {
            return;
        }
        let mut data = self.data.write().expect("table lock poisoned");
        data.extend(&self.law, want);
    }

    pub fn log_pmf(&self, k: u64) -> f64 {
        if k <= TABLE_LIMIT {
            self.extend_to(k);
            return self.data.read().expect("table lock poisoned").log_pmf[k as usize];
        }
        // pmf(k) = S(k-1) - S(k) = S(k-1) * (-a / k)
        self.log_survival(k - 1) + (-self.law.gamma_shift() / k as f64).ln()
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.log_pmf(k).exp()
    }

    /// Partial sum of the pmf up to and including `k`.
    pub fn cumulative(&self, k: u64) -> f64 {
        if k <= TABLE_LIMIT {
            self.extend_to(k);
            return self.data.read().expect("table lock poisoned").cumulative[k as usize];
        }
        1.0 - self.survival(k)
    }

    /// `P(value > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        if k <= TABLE_LIMIT {
            self.extend_to(k);
            return self.data.read().expect("table lock poisoned").survival[k as usize];
        }
        self.log_survival(k).exp()
    }

    fn log_survival(&self, k: u64) -> f64 {
        if k <= TABLE_LIMIT {
            return self.survival(k).ln();
        }
        let anchor = self.survival(TABLE_LIMIT).ln();
        let a = self.law.gamma_shift();
        let x0 = (TABLE_LIMIT + 1) as f64;
        let x = k as f64 + 1.0;
        anchor + ln_gamma_ratio_large(x, a) - ln_gamma_ratio_large(x0, a)
    }

    /// Draws one value, returning `cap` with `truncated` set whenever the
    /// exact draw would have exceeded `cap`.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream, cap: u64) -> Draw {
        let v = rng.unit_positive();
        self.invert(v, cap)
    }

    /// Inverse of the survival function at `v` in `(0, 1]`, truncated at `cap`.
    pub fn invert(&self, v: f64, cap: u64) -> Draw {
        let cap = cap.max(1);
        let k = if self.head[HEAD - 1] < v {
            self.head.partition_point(|&s| s >= v) as u64
        } else {
            match self.invert_tail(v, cap) {
                Some(k) => k,
                None => {
                    return Draw {
                        value: cap,
                        truncated: true,
                    }
                }
            }
        };
        if k > cap {
            Draw {
                value: cap,
                truncated: true,
            }
        } else {
            Draw {
                value: k,
                truncated: false,
            }
        }
    }

    /// Smallest `k >= HEAD` with `S(k) < v`, or `None` when that exceeds `cap`.
    fn invert_tail(&self, v: f64, cap: u64) -> Option<u64> {
        let bound = cap.min(TABLE_LIMIT) as usize;
        loop {
            {
                let data = self.data.read().expect("table lock poisoned");
                let n = data.survival.len();
                if data.survival[n - 1] < v {
                    let k = HEAD + data.survival[HEAD..].partition_point(|&s| s >= v);
                    return Some(k as u64);
                }
                if n > bound {
                    break;
                }
            }
            let mut data = self.data.write().expect("table lock poisoned");
            let n = data.survival.len();
            if data.survival[n - 1] >= v && n <= bound {
                let target = (2 * n).min(bound + 1).min(TABLE_LIMIT as usize + 1);
                data.extend(&self.law, target);
            }
        }
        if cap <= TABLE_LIMIT {
            return None;
        }
        // Far tail: bisection on the asymptotic survival function.
        self.extend_to(TABLE_LIMIT);
        let log_v = v.ln();
        if self.log_survival(cap) >= log_v {
            return None;
        }
        let (mut lo, mut hi) = (TABLE_LIMIT, cap);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.log_survival(mid) < log_v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Writes `k,pmf,cumulative` rows for `k = 0..=upto`.
    pub fn write_csv<W: Write>(&self, mut out: W, upto: u64) -> Result<()> {
        writeln!(out, "k,pmf,cumulative")?;
        for k in 0..=upto {
            writeln!(out, "{},{},{}", k, self.pmf(k), self.cumulative(k))?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for PmfTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PmfTable")
            .field("law", &self.law)
            .field("len", &self.len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn head_inversion_matches_definition() {
        let t = PmfTable::sibuya(0.5).unwrap();
        // S(1) = 0.5, S(2) = 0.375.
        assert_eq!(t.invert(1.0, 100).value, 1);
        assert_eq!(t.invert(0.5000001, 100).value, 1);
        assert_eq!(t.invert(0.5, 100).value, 2);
        assert_eq!(t.invert(0.4, 100).value, 2);
        assert_eq!(t.invert(0.375, 100).value, 3);
    }

    #[test]
    fn truncation_at_cap() {
        let t = PmfTable::sibuya(0.5).unwrap();
        let d = t.invert(0.3, 2);
        assert_eq!(
            d,
            Draw {
                value: 2,
                truncated: true
            }
        );
        let d = t.invert(1e-4, 1000);
        assert!(d.truncated);
        let s = t.survival(1000);
        assert!(!t.invert(s * 0.999, 1_000_000).truncated);
        assert!(t.invert(s * 0.999, 1000).truncated);
        assert!(!t.invert(s * 1.0001, 1000).truncated);
    }

    #[test]
    fn offspring_never_returns_one() {
        let t = PmfTable::offspring(0.5).unwrap();
        for i in 1..10_000 {
            let v = i as f64 / 10_000.0;
            assert_ne!(t.invert(v, 1_000_000).value, 1);
        }
    }

    #[test]
    fn table_grows_lazily_and_tail_search_is_consistent() {
        let t = PmfTable::sibuya(0.3).unwrap();
        assert_eq!(t.len(), INITIAL_LEN);
        let v = t.survival(100_000) * 0.99999;
        let d = t.invert(v, 1 << 30);
        assert!(!d.truncated);
        assert!(t.len() > 100_000);
        assert!(t.survival(d.value) < v && t.survival(d.value - 1) >= v);
    }

    #[test]
    fn asymptotic_tail_continues_exact_table() {
        let t = PmfTable::sibuya(0.25).unwrap();
        let exact = t.survival(TABLE_LIMIT);
        let next = t.survival(TABLE_LIMIT + 1);
        let want = exact * (1.0 - 0.25 / (TABLE_LIMIT + 1) as f64);
        assert!((next / want - 1.0).abs() < 1e-12);
        // Power-law shape: S(k) ~ c k^-gamma.
        let r = t.survival(1_000_000_000_000) / t.survival(1_000_000_000);
        assert!((r / 1000f64.powf(-0.25) - 1.0).abs() < 1e-6);
        let v = t.survival(5_000_000_000) * 0.9999999;
        let d = t.invert(v, u64::MAX / 2);
        assert!(!d.truncated);
        assert!(t.survival(d.value) < v && t.survival(d.value - 1) >= v);
    }

    #[test]
    fn degenerate_boundaries() {
        let t = PmfTable::sibuya(1.0).unwrap();
        assert_eq!(t.pmf(1), 1.0);
        assert_eq!(t.pmf(2), 0.0);
        assert_eq!(t.invert(1e-300, 10).value, 1);
        let o = PmfTable::offspring(1.0).unwrap();
        assert_eq!(o.pmf(0), 0.5);
        assert_eq!(o.pmf(2), 0.5);
        assert_eq!(o.pmf(3), 0.0);
        assert_eq!(o.invert(1e-300, 10).value, 2);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let t = PmfTable::offspring(0.5).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,pmf,cumulative");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1,0,"));
    }
}
