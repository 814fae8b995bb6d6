//! Sharded Monte Carlo means.
//!
//! Paths are split over a fixed number of shards, each with its own ChaCha8 stream. Shards
//! run in parallel and are merged in shard order, so results do not depend on the thread
//! count.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ibm_core::PhaseState;

use super::{simulate_path, Path, PathGrid, RngSpec};

pub const SHARDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateCI {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl EstimateCI {
    /// |mean − target| in units of stderr; 0 when both the gap and stderr vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.stderr
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64;
        self.n = n;
    }

    fn ci(&self) -> EstimateCI {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        EstimateCI {
            mean: self.mean,
            stderr: (var.max(0.0) / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Means of an `n_out`-vector sampled `n_paths` times. `sample` fills the vector for one
/// path from the shard's generator; the first error, in shard order, is returned.
pub fn estimate_with<F>(n_out: usize, n_paths: u64, rng: RngSpec, sample: F) -> Result<Vec<EstimateCI>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    if n_paths < 2 {
        return domain(format!("needs n_paths >= 2, got {n_paths}"));
    }
    let per = n_paths / SHARDS as u64;
    let extra = n_paths % SHARDS as u64;
    let shards: Vec<Result<Vec<Moments>>> = (0..SHARDS)
        .into_par_iter()
        .map(|k| {
            let count = per + u64::from((k as u64) < extra);
            let mut r = rng.shard(k as u64).rng();
            let mut acc = vec![Moments::default(); n_out];
            let mut buf = vec![0.0; n_out];
            for _ in 0..count {
                buf.iter_mut().for_each(|v| *v = 0.0);
                sample(&mut r, &mut buf)?;
                for (a, &v) in acc.iter_mut().zip(&buf) {
                    a.push(v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::default(); n_out];
    for s in shards {
        for (t, m) in total.iter_mut().zip(s?.iter()) {
            t.merge(m);
        }
    }
    Ok(total.iter().map(Moments::ci).collect())
}

/// Mean of `functional` over exact paths on `grid`, with crossings of `levels` recorded.
pub fn estimate<F>(
    functional: F,
    start: PhaseState,
    grid: PathGrid,
    levels: &[f64],
    n_paths: u64,
    rng: RngSpec,
) -> Result<EstimateCI>
where
    F: Fn(&Path) -> f64 + Sync,
{
    grid.validate()?;
    let v = estimate_with(1, n_paths, rng, |r, out| {
        out[0] = functional(&simulate_path(start, grid, levels, r)?);
        Ok(())
    })?;
    Ok(v[0])
}
