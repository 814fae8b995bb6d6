//! Exact simulation of (X, B) with crossings located on exact Brownian-bridge refinements.
//!
//! Each step draws the exact Gaussian pair, so the law at step ends carries no
//! discretization error whatever the step size. Between step ends the conditional mean of X
//! is the cubic Hermite interpolant and its conditional sd is at most h^{3/2}/√192. A step
//! whose interpolant comes within BRIDGE_SIGMAS of those sds of a tracked level is bisected
//! by sampling the exact bridge midpoint, down to H_FINE.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Result};
use crate::ibm_core::PhaseState;

use super::{Crossing, Path, PathGrid, Sample};

const BRIDGE_SIGMAS: f64 = 8.0;
const H_FINE: f64 = 1e-7;
const LAMBDA: f64 = 0.5;
const H_MIN: f64 = 1e-3;

/// (∫_0^dt W, W_dt) for a standard Brownian motion W: Var = dt³/3 and dt, Cov = dt²/2.
pub fn sample_increment<R: Rng + ?Sized>(dt: f64, rng: &mut R) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let s = dt.sqrt();
    (dt * s * (0.5 * z1 + z2 / (2.0 * 3f64.sqrt())), s * z1)
}

/// Cubic Hermite interpolant on [0, h] of values x0, x1 and slopes y0, y1.
#[derive(Debug, Clone, Copy)]
pub struct Cubic {
    x0: f64,
    y0: f64,
    c2: f64,
    c3: f64,
    pub h: f64,
}

impl Cubic {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> Self {
        let slope = (x1 - x0) / h;
        Cubic {
            x0,
            y0,
            c2: (3.0 * slope - 2.0 * y0 - y1) / h,
            c3: (y0 + y1 - 2.0 * slope) / (h * h),
            h,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.x0 + s * (self.y0 + s * (self.c2 + s * self.c3))
    }

    pub fn slope(&self, s: f64) -> f64 {
        self.y0 + s * (2.0 * self.c2 + 3.0 * s * self.c3)
    }

    // Zeros of the slope strictly inside (a, b), ascending.
    fn critical(&self, a: f64, b: f64) -> Vec<f64> {
        let (qa, qb, qc) = (3.0 * self.c3, 2.0 * self.c2, self.y0);
        let mut r = Vec::with_capacity(2);
        if qa.abs() * self.h < 1e-14 * (qb.abs() + qc.abs() / self.h) {
            if qb != 0.0 {
                r.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let q = -0.5 * (qb + qb.signum() * disc.sqrt());
                if q != 0.0 {
                    r.push(q / qa);
                    r.push(qc / q);
                } else {
                    r.push(0.0);
                }
            }
        }
        r.retain(|&s| s > a && s < b);
        r.sort_by(f64::total_cmp);
        r
    }

    /// (min, max) of the interpolant on [a, b].
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (self.value(a).min(self.value(b)), self.value(a).max(self.value(b)));
        for s in self.critical(a, b) {
            let v = self.value(s);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Minimum over (0, h], leaving out the starting value.
    pub fn min_after_start(&self) -> f64 {
        self.critical(0.0, self.h)
            .into_iter()
            .map(|s| self.value(s))
            .fold(self.value(self.h), f64::min)
    }

    /// Crossing points of `level` in (0, h]: sign changes on monotone pieces, so a start on
    /// the level or a tangency is not a crossing.
    pub fn crossings(&self, level: f64) -> Vec<f64> {
        let mut knots = vec![0.0];
        knots.extend(self.critical(0.0, self.h));
        knots.push(self.h);
        let mut out = Vec::new();
        for w in knots.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            let (fa, fb) = (self.value(a) - level, self.value(b) - level);
            if fb == 0.0 && fa != 0.0 {
                out.push(b);
                continue;
            }
            if !(fa * fb < 0.0) {
                continue;
            }
            let up = fa < 0.0;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if (self.value(m) - level < 0.0) == up {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        out
    }
}

/// Exact draw of (X, B) at the midpoint of a step of length h given both ends.
pub fn bridge_midpoint<R: Rng + ?Sized>(x0: f64, y0: f64, x1: f64, y1: f64, h: f64, rng: &mut R) -> (f64, f64) {
    let m = 0.5 * h;
    let r = h - m;
    // Σ(s) = [[s³/3, s²/2], [s²/2, s]]
    let sig = |s: f64| [s * s * s / 3.0, s * s / 2.0, s];
    let [a, b, c] = sig(m);
    // Cov(Z_m, Z_h) = Σ(m) Aᵀ with A = [[1, r], [0, 1]]
    let cxx = a + r * b;
    let cxy = b;
    let cyx = b + r * c;
    let cyy = c;
    let [p, q, s] = sig(h);
    let det = p * s - q * q;
    let (ip, iq, is) = (s / det, -q / det, p / det);
    // K = C Σ(h)^{-1}
    let k11 = cxx * ip + cxy * iq;
    let k12 = cxx * iq + cxy * is;
    let k21 = cyx * ip + cyy * iq;
    let k22 = cyx * iq + cyy * is;
    let (ex, ey) = (x1 - (x0 + y0 * h), y1 - y0);
    let mx = x0 + y0 * m + k11 * ex + k12 * ey;
    let my = y0 + k21 * ex + k22 * ey;
    let vxx = a - (k11 * cxx + k12 * cxy);
    let vxy = b - (k11 * cyx + k12 * cyy);
    let vyy = c - (k21 * cyx + k22 * cyy);
    let l11 = vxx.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { vxy / l11 } else { 0.0 };
    let l22 = (vyy - l21 * l21).max(0.0).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    (mx + l11 * z1, my + l21 * z1 + l22 * z2)
}

/// End the path at the `count`-th crossing of `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub level: f64,
    pub count: usize,
}

/// What a simulated path records.
#[derive(Debug, Clone, Default)]
pub struct Tracking {
    /// X-levels whose crossings are located and stored.
    pub levels: Vec<f64>,
    pub stop: Option<StopRule>,
    /// Observation times, ascending, in (0, horizon].
    pub observe: Vec<f64>,
    /// Refine steps until the running supremum is resolved to this bridge tolerance.
    pub sup_tol: Option<f64>,
    pub b_levels: Vec<f64>,
}

struct Walker<'a, R: Rng + ?Sized> {
    tr: &'a Tracking,
    rng: &'a mut R,
    sup: f64,
    counts: Vec<usize>,
    crossings: Vec<Crossing>,
    b_hit: Vec<Option<f64>>,
    stopped: Option<(f64, f64, f64)>,
    stop_idx: Option<usize>,
}

impl<R: Rng + ?Sized> Walker<'_, R> {
    fn needs_split(&self, cubic: &Cubic, x0: f64, x1: f64) -> bool {
        let margin = BRIDGE_SIGMAS * (cubic.h.powi(3) / 192.0).sqrt();
        let (lo, hi) = cubic.range_on(0.0, cubic.h);
        if self.tr.levels.iter().any(|&l| l >= lo - margin && l <= hi + margin) {
            return true;
        }
        match self.tr.sup_tol {
            Some(eps) => margin > eps && hi + margin > self.sup.max(x0).max(x1),
            None => false,
        }
    }

    fn scan(&mut self, t0: f64, x0: f64, y0: f64, t1: f64, x1: f64, y1: f64) {
        let h = t1 - t0;
        let cubic = Cubic::new(x0, y0, x1, y1, h);
        if h > H_FINE && self.needs_split(&cubic, x0, x1) {
            let (xm, ym) = bridge_midpoint(x0, y0, x1, y1, h, self.rng);
            let tm = t0 + 0.5 * h;
            self.scan(t0, x0, y0, tm, xm, ym);
            if self.stopped.is_none() {
                self.scan(tm, xm, ym, t1, x1, y1);
            }
            return;
        }
        self.leaf(t0, y0, y1, &cubic);
    }

    fn leaf(&mut self, t0: f64, y0: f64, y1: f64, cubic: &Cubic) {
        let (lo, hi) = cubic.range_on(0.0, cubic.h);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for (i, &l) in self.tr.levels.iter().enumerate() {
            if l >= lo && l <= hi {
                found.extend(cubic.crossings(l).into_iter().map(|s| (s, i)));
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (s, i) in found {
            let level = self.tr.levels[i];
            let v = cubic.slope(s);
            self.crossings.push(Crossing { level, time: t0 + s, velocity: v });
            self.counts[i] += 1;
            if self.stop_idx == Some(i) && self.counts[i] == self.tr.stop.map_or(0, |r| r.count) {
                self.sup = self.sup.max(cubic.range_on(0.0, s).1);
                self.stopped = Some((t0 + s, level, v));
                return;
            }
        }
        self.sup = self.sup.max(hi);
        for (j, &b) in self.tr.b_levels.iter().enumerate() {
            if self.b_hit[j].is_none() && (y0 - b) * (y1 - b) <= 0.0 && y0 != y1 {
                self.b_hit[j] = Some(t0 + cubic.h * (b - y0) / (y1 - y0));
            }
        }
    }
}

fn step_size(x: f64, y: f64, levels: &[f64], cap: f64) -> f64 {
    let d = levels.iter().map(|&l| (x - l).abs()).fold(f64::INFINITY, f64::min);
    let mut h = cap;
    if d.is_finite() {
        h = h.min(LAMBDA * d.powf(2.0 / 3.0));
        if y != 0.0 {
            h = h.min(LAMBDA * d / y.abs());
        }
    }
    h.max(H_MIN.min(cap))
}

/// Path of (X, B) from `start` to `horizon` (or an earlier stop), steps at most `max_step`.
pub fn simulate_tracked<R: Rng + ?Sized>(
    start: PhaseState,
    horizon: f64,
    max_step: f64,
    tracking: &Tracking,
    rng: &mut R,
) -> Result<Path> {
    if !start.is_finite() {
        return domain(format!("non-finite start {start:?}"));
    }
    if !(horizon > 0.0 && horizon.is_finite() && max_step > 0.0) {
        return domain(format!("needs horizon, max_step > 0; got {horizon}, {max_step}"));
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
    let mut w = Walker {
        tr: tracking,
        rng,
        sup: start.x,
        counts: vec![0; tracking.levels.len()],
        crossings: Vec::new(),
        b_hit: tracking.b_levels.iter().map(|&b| (b == start.y).then_some(0.0)).collect(),
        stopped: None,
        stop_idx,
    };
    let (mut t, mut x, mut y) = (0.0, start.x, start.y);
    let mut samples = vec![Sample { t: 0.0, x, y, sup: x }];
    let mut obs = tracking.observe.iter().copied().peekable();
    while t < horizon {
        let target = obs.peek().copied().unwrap_or(horizon);
        let h = step_size(x, y, &tracking.levels, max_step);
        let (t1, is_target) = if t + h >= target { (target, true) } else { (t + h, false) };
        let dt = t1 - t;
        let (dx, dy) = sample_increment(dt, w.rng);
        let (x1, y1) = (x + y * dt + dx, y + dy);
        w.scan(t, x, y, t1, x1, y1);
        if w.stopped.is_some() {
            break;
        }
        (t, x, y) = (t1, x1, y1);
        if is_target && obs.peek() == Some(&target) {
            obs.next();
            samples.push(Sample { t, x, y, sup: w.sup });
        }
    }
    let (end, stopped) = match w.stopped {
        Some((ts, xs, ys)) => (Sample { t: ts, x: xs, y: ys, sup: w.sup }, true),
        None => (Sample { t, x, y, sup: w.sup }, false),
    };
    Ok(Path {
        samples,
        crossings: w.crossings,
        b_crossings: tracking.b_levels.iter().copied().zip(w.b_hit).collect(),
        ran_to: end.t,
        end,
        stopped,
        levels: tracking.levels.clone(),
    })
}

/// Exact samples at every grid time, with crossings of `levels`.
pub fn simulate_path<R: Rng + ?Sized>(start: PhaseState, grid: PathGrid, levels: &[f64], rng: &mut R) -> Result<Path> {
    grid.validate()?;
    let tracking = Tracking {
        levels: levels.to_vec(),
        observe: grid.times(),
        ..Tracking::default()
    };
    simulate_tracked(start, grid.horizon, grid.dt, &tracking, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cubic_interpolates_ends() {
        let c = Cubic::new(1.0, -2.0, 0.5, 3.0, 0.7);
        assert!((c.value(0.7) - 0.5).abs() < 1e-14);
        assert!((c.slope(0.7) - 3.0).abs() < 1e-13);
        assert!((c.slope(0.0) + 2.0).abs() < 1e-15);
        // down from 1 to a minimum near 0.211, then up to 0.5
        for (level, count) in [(0.8, 1), (0.3, 2), (0.1, 0)] {
            let r = c.crossings(level);
            assert_eq!(r.len(), count, "level {level}");
            for s in r {
                assert!((c.value(s) - level).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bridge_midpoint_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x0, y0, x1, y1, h) = (0.2, 1.0, 0.9, -0.4, 0.8);
        let n = 200_000;
        let (mut sx, mut sxx) = (0.0, 0.0);
        for _ in 0..n {
            let (xm, _) = bridge_midpoint(x0, y0, x1, y1, h, &mut rng);
            sx += xm;
            sxx += xm * xm;
        }
        let mean = sx / n as f64;
        let var = sxx / n as f64 - mean * mean;
        let want = Cubic::new(x0, y0, x1, y1, h).value(0.4);
        let sd = (h.powi(3) / 192.0).sqrt();
        assert!((mean - want).abs() < 5.0 * sd / (n as f64).sqrt());
        assert!((var / (sd * sd) - 1.0).abs() < 0.02);
    }
}
