//! Poisson request streams.
//!
//! Arrivals form a Poisson process whose rate is chosen so that the offered
//! compute load matches `target_load`. Durations are exponential, VC sizes
//! are geometric on `{1, 2, ...}` with mean `mean_n`, and `c` and `b` are
//! drawn independently and uniformly from `demand_values`.

use std::io::{BufRead, Write};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::{self, Rational};
use crate::request::VcRequest;
use crate::topology::FatTreeSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub mean_n: f64,
    #[serde(with = "crate::frac::serde_str_vec")]
    pub demand_values: Vec<Rational>,
    pub target_load: f64,
    pub mean_duration: f64,
    pub total_requests: usize,
    pub warmup_requests: usize,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            mean_n: 49.0,
            demand_values: vec![frac::ratio(1, 8), frac::ratio(1, 4), frac::ratio(1, 2)],
            target_load: 0.8,
            mean_duration: 1.0,
            total_requests: 80_000,
            warmup_requests: 10_000,
            seed: 1,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidWorkload(m.into()));
        if !(self.target_load > 0.0 && self.target_load <= 1.0) {
            return bad("target_load must lie in (0, 1]");
        }
        if !(self.mean_n >= 1.0) || !self.mean_n.is_finite() {
            return bad("mean_n must be >= 1");
        }
        if !(self.mean_duration > 0.0) || !self.mean_duration.is_finite() {
            return bad("mean_duration must be positive");
        }
        if self.demand_values.is_empty() {
            return bad("demand_values is empty");
        }
        if self
            .demand_values
            .iter()
            .any(|v| *v <= Rational::zero() || *v > Rational::one())
        {
            return bad("every demand value must lie in (0, 1]");
        }
        if self.total_requests > 0 && self.warmup_requests >= self.total_requests {
            return bad("warmup_requests must be smaller than total_requests");
        }
        Ok(())
    }

    pub fn mean_demand(&self) -> f64 {
        let sum: Rational = self.demand_values.iter().sum();
        frac::to_f64(&sum) / self.demand_values.len() as f64
    }
}

/// Arrival rate that offers `target_load` of the tree's compute:
/// `load · capacity / (mean_duration · E[n·c])`.
pub fn arrival_rate_for(config: &WorkloadConfig, tree: &FatTreeSpec) -> f64 {
    let capacity = frac::to_f64(&tree.total_compute());
    let mean_vc_compute = config.mean_n * config.mean_demand();
    config.target_load * capacity / (config.mean_duration * mean_vc_compute)
}

/// Generates the request stream. Deterministic in `config.seed`; arrival
/// times are strictly increasing.
pub fn generate(config: &WorkloadConfig, tree: &FatTreeSpec) -> Result<Vec<VcRequest>> {
    config.validate()?;
    tree.validate()?;
    let rate = arrival_rate_for(config, tree);
    let gaps = Exp::new(rate).map_err(|e| Error::InvalidWorkload(format!("arrival rate {rate}: {e}")))?;
    let lifetimes = Exp::new(1.0 / config.mean_duration)
        .map_err(|e| Error::InvalidWorkload(format!("mean duration: {e}")))?;
    let extra_vms = Geometric::new(1.0 / config.mean_n)
        .map_err(|e| Error::InvalidWorkload(format!("mean_n: {e}")))?;
    let values = &config.demand_values;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.total_requests);
    let mut now = 0.0f64;
    for id in 0..config.total_requests {
        let mut next = now + gaps.sample(&mut rng);
        while next <= now {
            next += gaps.sample(&mut rng);
        }
        now = next;
        let mut duration = lifetimes.sample(&mut rng);
        while duration <= 0.0 {
            duration = lifetimes.sample(&mut rng);
        }
        let n = extra_vms.sample(&mut rng).saturating_add(1).min(u32::MAX as u64) as u32;
        let c = values[rng.random_range(0..values.len())];
        let b = values[rng.random_range(0..values.len())];
        out.push(VcRequest::new(id as u64, n, c, b, now, duration)?);
    }
    Ok(out)
}

/// Writes one request per line: `id arrival duration n c b`. Floats use the
/// shortest representation that reads back to the same value.
pub fn write_stream<W: Write>(mut w: W, requests: &[VcRequest]) -> Result<()> {
    writeln!(w, "# id arrival duration n c b")?;
    for r in requests {
        writeln!(
            w,
            "{} {:?} {:?} {} {} {}",
            r.id,
            r.arrival,
            r.duration,
            r.n,
            frac::format(&r.c),
            frac::format(&r.b)
        )?;
    }
    Ok(())
}

pub fn read_stream<R: BufRead>(r: R) -> Result<Vec<VcRequest>> {
    let mut out: Vec<VcRequest> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, arrival, duration, n, c, b] = fields[..] else {
            return Err(bad("expected 6 fields"));
        };
        let req = VcRequest::new(
            id.parse().map_err(|_| bad("bad id"))?,
            n.parse().map_err(|_| bad("bad n"))?,
            frac::parse(c)?,
            frac::parse(b)?,
            arrival.parse().map_err(|_| bad("bad arrival"))?,
            duration.parse().map_err(|_| bad("bad duration"))?,
        )?;
        if let Some(prev) = out.last() {
            if req.arrival < prev.arrival {
                return Err(bad("arrivals must be non-decreasing"));
            }
        }
        out.push(req);
    }
    Ok(out)
}
