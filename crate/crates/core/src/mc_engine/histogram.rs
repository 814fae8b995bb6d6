use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::ibm_core::PhaseState;

use super::exact::{simulate_tracked, StopRule, Tracking};
use super::{estimate_with, EstimateCI, RngSpec};

/// Regular grid of cells over [u_lo, u_hi] × [v_lo, v_hi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Histogram2dSpec {
    pub u_lo: f64,
    pub u_hi: f64,
    pub nu: usize,
    pub v_lo: f64,
    pub v_hi: f64,
    pub nv: usize,
}

impl Histogram2dSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_lo < self.u_hi && self.v_lo < self.v_hi && self.nu > 0 && self.nv > 0) {
            return domain(format!("bad histogram spec {self:?}"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn du(&self) -> f64 {
        (self.u_hi - self.u_lo) / self.nu as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_hi - self.v_lo) / self.nv as f64
    }

    /// Row-major index (iu·nv + iv) of the cell holding (u, v).
    pub fn cell(&self, u: f64, v: f64) -> Option<usize> {
        if !(u >= self.u_lo && u < self.u_hi && v >= self.v_lo && v < self.v_hi) {
            return None;
        }
        let iu = (((u - self.u_lo) / self.du()) as usize).min(self.nu - 1);
        let iv = (((v - self.v_lo) / self.dv()) as usize).min(self.nv - 1);
        Some(iu * self.nv + iv)
    }

    /// ((u0, u1), (v0, v1)) of cell `k`.
    pub fn bounds(&self, k: usize) -> ((f64, f64), (f64, f64)) {
        let (iu, iv) = (k / self.nv, k % self.nv);
        let u0 = self.u_lo + iu as f64 * self.du();
        let v0 = self.v_lo + iv as f64 * self.dv();
        ((u0, u0 + self.du()), (v0, v0 + self.dv()))
    }
}

/// Per-cell density estimates and the total mass they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hist2d {
    pub spec: Histogram2dSpec,
    pub density: Vec<EstimateCI>,
    pub mass: EstimateCI,
}

/// Histogram of (X_t, B_t) on {T_0 > t}, as a density in (u, v).
pub fn killed_density_histogram(
    start: PhaseState,
    t: f64,
    bins: Histogram2dSpec,
    n_paths: u64,
    rng: RngSpec,
) -> Result<Hist2d> {
    bins.validate()?;
    if !(start.x > 0.0 || (start.x == 0.0 && start.y > 0.0)) {
        return domain(format!("killed process needs x > 0 or (x = 0, y > 0), got {start:?}"));
    }
    let tracking = Tracking {
        levels: vec![0.0],
        stop: Some(StopRule { level: 0.0, count: 1 }),
        ..Tracking::default()
    };
    let n = bins.len();
    let est = estimate_with(n + 1, n_paths, rng, |r, out| {
        let p = simulate_tracked(start, t, t, &tracking, r)?;
        if !p.stopped {
            out[n] = 1.0;
            if let Some(k) = bins.cell(p.end.x, p.end.y) {
                out[k] = 1.0;
            }
        }
        Ok(())
    })?;
    let area = bins.du() * bins.dv();
    let density = est[..n]
        .iter()
        .map(|e| EstimateCI { mean: e.mean / area, stderr: e.stderr / area, n: e.n })
        .collect();
    Ok(Hist2d { spec: bins, density, mass: est[n] })
}
