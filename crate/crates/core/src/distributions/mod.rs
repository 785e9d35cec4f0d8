//! Exact pmfs and inversion samplers for Sibuya batch sizes, the critical
//! offspring law and discrete-stable compound Poisson increments.

mod table;

use std::sync::Arc;

use rand_distr::{Distribution, Poisson};

use crate::error::{domain, Result};
use crate::rng::RngStream;

pub use table::{Draw, Law, PmfTable, TABLE_LIMIT};

/// Default truncation point for single batch and offspring draws.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// Below this mean Poisson variates are drawn by sequential inversion.
const POISSON_INVERSION_LIMIT: f64 = 30.0;

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(domain("gamma", gamma, "0 < gamma <= 1"))
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(domain("beta", beta, "0 < beta <= 1"))
    }
}

/// `P(I = k) = (-1)^(k-1) [gamma]_k / k!` for `k >= 1`, by the recurrence
/// `P(I = k+1) = P(I = k) (k - gamma) / (k + 1)` carried in log space.
pub fn sibuya_pmf(k: u64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if k < 1 {
        return Err(domain("k", k as f64, "k >= 1"));
    }
    let mut log_p = gamma.ln();
    for j in 1..k {
        let j = j as f64;
        log_p += (j - gamma).ln() - (j + 1.0).ln();
    }
    Ok(log_p.exp())
}

/// `P(I > k) = prod_{j=1..k} (1 - gamma/j)`.
pub fn sibuya_survival(k: u64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok((1..=k).fold(1.0, |acc, j| acc * (1.0 - gamma / j as f64)))
}

/// k-th power-series coefficient of `h(s) = s + (1-s)^(1+beta)/(1+beta)`.
pub fn offspring_pmf(k: u64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(match k {
        0 => 1.0 / (1.0 + beta),
        1 => 0.0,
        _ => {
            let mut log_p = (beta / 2.0).ln();
            for j in 2..k {
                let j = j as f64;
                log_p += (j - 1.0 - beta).ln() - (j + 1.0).ln();
            }
            log_p.exp()
        }
    })
}

/// Sibuya batch-size law backed by a shared table.
#[derive(Clone, Debug)]
pub struct SibuyaLaw {
    gamma: f64,
    table: Arc<PmfTable>,
}

impl SibuyaLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            gamma,
            table: PmfTable::shared(Law::Sibuya { gamma })?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn table(&self) -> &PmfTable {
        &self.table
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.table.pmf(k)
    }

    pub fn survival(&self, k: u64) -> f64 {
        self.table.survival(k)
    }

    /// `g(s) = 1 - (1-s)^gamma`.
    pub fn pgf(&self, s: f64) -> f64 {
        -(self.gamma * (-s).ln_1p()).exp_m1()
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream, cap: u64) -> Draw {
        self.table.sample(rng, cap)
    }
}

/// Offspring law of the critical reproduction p.g.f. `h`.
#[derive(Clone, Debug)]
pub struct OffspringLaw {
    beta: f64,
    table: Arc<PmfTable>,
}

impl OffspringLaw {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            table: PmfTable::shared(Law::Offspring { beta })?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn table(&self) -> &PmfTable {
        &self.table
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.table.pmf(k)
    }

    pub fn survival(&self, k: u64) -> f64 {
        self.table.survival(k)
    }

    /// `h(s) = s + (1-s)^(1+beta)/(1+beta)`.
    pub fn pgf(&self, s: f64) -> f64 {
        s + ((1.0 + self.beta) * (-s).ln_1p()).exp() / (1.0 + self.beta)
    }

    /// `sum_{k <= cap} k p_k`, the mean of a draw truncated at `cap`
    /// (truncated draws counted as `cap`).
    pub fn truncated_mean(&self, cap: u64) -> f64 {
        // E[min(X, cap)] = sum_{k < cap} S(k)
        (0..cap).map(|k| self.table.survival(k)).sum()
    }

    #[inline]
    pub fn sample(&self, rng: &mut RngStream, cap: u64) -> Draw {
        self.table.sample(rng, cap)
    }
}

/// Increments of the compound Poisson process with p.g.f. `exp{-theta t (1-s)^gamma}`.
#[derive(Clone, Debug)]
pub struct DiscreteStable {
    theta: f64,
    batches: SibuyaLaw,
}

impl DiscreteStable {
    pub fn new(theta: f64, gamma: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(domain("theta", theta, "theta > 0"));
        }
        Ok(Self {
            theta,
            batches: SibuyaLaw::new(gamma)?,
        })
    }

    pub fn batches(&self) -> &SibuyaLaw {
        &self.batches
    }

    /// Poisson(`theta dt`) many Sibuya batches, each capped at `cap`, the
    /// total capped at `total_cap`.
    pub fn sample_increment(&self, rng: &mut RngStream, dt: f64, cap: u64, total_cap: u64) -> Result<Draw> {
        if dt.is_nan() || dt < 0.0 {
            return Err(domain("dt", dt, "dt >= 0"));
        }
        let n = sample_poisson(rng, self.theta * dt);
        let mut total = 0u64;
        let mut truncated = false;
        for _ in 0..n {
            let d = self.batches.sample(rng, cap);
            truncated |= d.truncated;
            total = total.saturating_add(d.value);
            if total > total_cap {
                return Ok(Draw {
                    value: total_cap,
                    truncated: true,
                });
            }
        }
        Ok(Draw {
            value: total,
            truncated,
        })
    }
}

/// Poisson variate: sequential inversion for small means, the `rand_distr`
/// rejection sampler otherwise.
pub fn sample_poisson(rng: &mut RngStream, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < POISSON_INVERSION_LIMIT {
        let u = rng.unit();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut k = 0u64;
        while u >= cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 && cdf <= u {
                // rounding left u above the accumulated mass
                break;
            }
        }
        k
    } else {
        let dist = Poisson::new(mean).expect("finite positive mean");
        dist.sample(rng) as u64
    }
}

pub fn sample_sibuya(rng: &mut RngStream, gamma: f64, cap: u64) -> Result<Draw> {
    Ok(SibuyaLaw::new(gamma)?.sample(rng, cap))
}

pub fn sample_offspring(rng: &mut RngStream, beta: f64, cap: u64) -> Result<Draw> {
    Ok(OffspringLaw::new(beta)?.sample(rng, cap))
}

pub fn sample_discrete_stable_increment(
    rng: &mut RngStream,
    theta: f64,
    dt: f64,
    gamma: f64,
    cap: u64,
) -> Result<Draw> {
    DiscreteStable::new(theta, gamma)?.sample_increment(rng, dt, cap, u64::MAX)
}
