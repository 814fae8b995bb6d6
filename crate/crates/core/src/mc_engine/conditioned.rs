//! Euler–Maruyama for the conditioned system dX = B dt, dB = dW + ∂_y ln h(X, B) dt.
//!
//! The Brownian part of each step is the exact Gaussian pair, the drift enters to first
//! order. Step sizes follow the scaling (x, y, t) → (c³x, cy, c²t) of the system:
//! dt = base·x^{2/3}/(1 + w²), w = y/x^{1/3}, when y ≤ 0, and base·max(x^{2/3}, y²) when
//! y > 0. For y < 0 a step is also kept below x/(4|y|). A proposal that would reach x ≤ 0
//! is discarded and redrawn with half the step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ibm_core::{HFast, PhaseState};

use super::exact::{sample_increment, Cubic, Tracking};
use super::{Crossing, Path, PathGrid, Sample};

const DT_MIN: f64 = 1e-8;
const KAPPA: f64 = 0.25;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionedStats {
    pub steps: u64,
    pub rejections: u64,
    pub min_dt: f64,
}

fn drift(table: &HFast, x: f64, y: f64) -> Result<f64> {
    if x == 0.0 {
        // h(0, y) = √y for y > 0
        return Ok(0.5 / y);
    }
    table.drift(PhaseState::new(x, y))
}

fn base_step(x: f64, y: f64, base: f64) -> f64 {
    let c = x.cbrt();
    if y > 0.0 {
        return base * (c * c).max(y * y);
    }
    let w = y / c;
    let dt = base * c * c / (1.0 + w * w);
    if y < 0.0 {
        dt.min(KAPPA * x / -y)
    } else {
        dt
    }
}

/// Conditioned path to `horizon`; `base` sets the step scale. Only levels, stop rule,
/// observations and B-levels of `tracking` apply; crossings use the per-step cubic.
pub fn simulate_conditioned_tracked<R: Rng + ?Sized>(
    start: PhaseState,
    horizon: f64,
    base: f64,
    tracking: &Tracking,
    rng: &mut R,
) -> Result<(Path, ConditionedStats)> {
    if !(start.is_finite() && (start.x > 0.0 || (start.x == 0.0 && start.y > 0.0))) {
        return domain(format!("conditioned start needs x > 0 or (x = 0, y > 0), got {start:?}"));
    }
    if !(horizon > 0.0 && horizon.is_finite() && base > 0.0) {
        return domain(format!("needs horizon, base > 0; got {horizon}, {base}"));
    }
    if tracking.observe.windows(2).any(|w| !(w[0] < w[1]))
        || tracking.observe.iter().any(|&t| !(t > 0.0 && t <= horizon))
    {
        return domain("observation times must increase within (0, horizon]");
    }
    let stop_idx = match tracking.stop {
        Some(r) => match tracking.levels.iter().position(|&l| l == r.level) {
            Some(i) if r.count >= 1 => Some(i),
            _ => return domain("stop rule needs a tracked level and count >= 1"),
        },
        None => None,
    };
    let table = HFast::global();
    let mut stats = ConditionedStats { min_dt: f64::INFINITY, ..Default::default() };
    let (mut t, mut x, mut y) = (0.0, start.x, start.y);
    let mut sup = x;
    let mut samples = vec![Sample { t, x, y, sup }];
    let mut crossings = Vec::new();
    let mut counts = vec![0usize; tracking.levels.len()];
    let mut b_hit: Vec<Option<f64>> = tracking.b_levels.iter().map(|&b| (b == y).then_some(0.0)).collect();
    let mut obs = tracking.observe.iter().copied().peekable();
    let mut stopped = None;
    'outer: while t < horizon {
        let target = obs.peek().copied().unwrap_or(horizon);
        let d = drift(table, x, y)?;
        let mut dt = base_step(x, y, base).min(target - t);
        let (x1, y1, c) = loop {
            if dt < DT_MIN {
                return Err(Error::StepCollapse { t, x, y, dt_min: DT_MIN });
            }
            let (dx, dy) = sample_increment(dt, rng);
            let x1 = x + y * dt + 0.5 * d * dt * dt + dx;
            let y1 = y + d * dt + dy;
            if x1 > 0.0 && y1.is_finite() {
                let c = Cubic::new(x, y, x1, y1, dt);
                if c.min_after_start() > 0.0 {
                    break (x1, y1, c);
                }
            }
            stats.rejections += 1;
            dt *= 0.5;
        };
        stats.steps += 1;
        stats.min_dt = stats.min_dt.min(dt);
        let (lo, hi) = c.range_on(0.0, dt);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for (i, &l) in tracking.levels.iter().enumerate() {
            if l >= lo && l <= hi {
                found.extend(c.crossings(l).into_iter().map(|s| (s, i)));
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (s, i) in found {
            let v = c.slope(s);
            crossings.push(Crossing { level: tracking.levels[i], time: t + s, velocity: v });
            counts[i] += 1;
            if stop_idx == Some(i) && Some(counts[i]) == tracking.stop.map(|r| r.count) {
                sup = sup.max(c.range_on(0.0, s).1);
                stopped = Some(Sample { t: t + s, x: tracking.levels[i], y: v, sup });
                break 'outer;
            }
        }
        sup = sup.max(hi);
        for (j, &b) in tracking.b_levels.iter().enumerate() {
            if b_hit[j].is_none() && (y - b) * (y1 - b) <= 0.0 && y != y1 {
                b_hit[j] = Some(t + dt * (b - y) / (y1 - y));
            }
        }
        t = if t + dt >= target { target } else { t + dt };
        (x, y) = (x1, y1);
        if t == target && obs.peek() == Some(&target) {
            obs.next();
            samples.push(Sample { t, x, y, sup });
        }
    }
    if samples[1..].iter().any(|s| !(s.x > 0.0)) {
        return Err(Error::Diagnostics("conditioned path reached x <= 0".into()));
    }
    let (end, was_stopped) = match stopped {
        Some(s) => (s, true),
        None => (Sample { t, x, y, sup }, false),
    };
    Ok((
        Path {
            samples,
            crossings,
            b_crossings: tracking.b_levels.iter().copied().zip(b_hit).collect(),
            ran_to: end.t,
            end,
            stopped: was_stopped,
            levels: tracking.levels.clone(),
        },
        stats,
    ))
}

/// Conditioned path with samples at the grid times; `grid.dt` is the step scale.
pub fn simulate_conditioned<R: Rng + ?Sized>(start: PhaseState, grid: PathGrid, levels: &[f64], rng: &mut R) -> Result<Path> {
    grid.validate()?;
    let tracking = Tracking {
        levels: levels.to_vec(),
        observe: grid.times(),
        ..Tracking::default()
    };
    Ok(simulate_conditioned_tracked(start, grid.horizon, grid.dt, &tracking, rng)?.0)
}
