//! Monte Carlo for (X, B): exact Gaussian steps, bridge-refined crossing detection, an
//! Euler–Maruyama integrator for the conditioned system, and sharded estimators.

mod conditioned;
mod estimate;
mod exact;
mod histogram;

pub use conditioned::{simulate_conditioned, simulate_conditioned_tracked, ConditionedStats};
pub use estimate::{estimate, estimate_with, EstimateCI, SHARDS};
pub use exact::{bridge_midpoint, sample_increment, simulate_path, simulate_tracked, Cubic, StopRule, Tracking};
pub use histogram::{killed_density_histogram, Hist2d, Histogram2dSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ibm_core::LastZero;

/// Seed and stream of a ChaCha8 generator; the pair fixes the whole sample sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub const fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    /// Stream for shard `k` of this spec; distinct for distinct (stream, k) with k < SHARDS.
    pub fn shard(&self, k: u64) -> RngSpec {
        RngSpec {
            seed: self.seed,
            stream: self.stream.wrapping_mul(SHARDS as u64).wrapping_add(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    pub dt: f64,
    pub horizon: f64,
}

impl PathGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        let g = PathGrid { dt, horizon };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= self.horizon && self.horizon.is_finite()) {
            return domain(format!("needs 0 < dt <= horizon, got dt={}, horizon={}", self.dt, self.horizon));
        }
        if self.horizon / self.dt > 1e9 {
            return domain("more than 1e9 grid steps");
        }
        Ok(())
    }

    /// Grid times dt, 2dt, ..., ending exactly at the horizon.
    pub fn times(&self) -> Vec<f64> {
        let n = (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize;
        (1..=n).map(|k| (k as f64 * self.dt).min(self.horizon)).collect()
    }
}

/// State at an observation time, with the running supremum of X up to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub sup: f64,
}

/// X passes through `level` at `time` with B = `velocity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub level: f64,
    pub time: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Start followed by the observation times reached.
    pub samples: Vec<Sample>,
    pub crossings: Vec<Crossing>,
    /// First time B reaches each requested level, by linear interpolation.
    pub b_crossings: Vec<(f64, Option<f64>)>,
    pub ran_to: f64,
    /// State at `ran_to`.
    pub end: Sample,
    /// True when a stop rule ended the path before the horizon.
    pub stopped: bool,
    pub levels: Vec<f64>,
}

impl Path {
    pub fn start(&self) -> Sample {
        self.samples[0]
    }

    /// Sample at observation time `t`, if the path got there.
    pub fn at(&self, t: f64) -> Option<Sample> {
        self.samples.iter().find(|s| s.t == t).copied()
    }

    pub fn first_crossing(&self, level: f64) -> Option<Crossing> {
        self.crossings.iter().find(|c| c.level == level).copied()
    }

    /// Last zero of X at or before `t`; needs level 0 tracked.
    pub fn last_zero_before(&self, t: f64) -> Result<LastZero> {
        if !self.levels.contains(&0.0) {
            return domain("level 0 is not tracked on this path");
        }
        let g = self
            .crossings
            .iter()
            .filter(|c| c.level == 0.0 && c.time <= t)
            .map(|c| c.time)
            .next_back();
        Ok(match g {
            Some(s) => LastZero::At(s),
            None if self.start().x == 0.0 => LastZero::At(0.0),
            None => LastZero::Never,
        })
    }
}

/// First `count` crossings of `level`, as (time, B at the crossing).
pub fn passage_times(path: &Path, level: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    if count == 0 {
        return domain("count must be at least 1");
    }
    Ok(path
        .crossings
        .iter()
        .filter(|c| c.level == level)
        .take(count)
        .map(|c| (c.time, c.velocity))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub g0t: LastZero,
    pub sup: f64,
    pub sigma_b_times: Vec<(f64, Option<f64>)>,
}

/// Last zero of X up to `ran_to`, running supremum, and first hitting times of the B-levels.
pub fn track_functionals(path: &Path) -> Result<Functionals> {
    if path.samples.is_empty() {
        return domain("empty path");
    }
    Ok(Functionals {
        g0t: path.last_zero_before(path.ran_to)?,
        sup: path.end.sup,
        sigma_b_times: path.b_crossings.clone(),
    })
}
