//! Penalization by a function of the last zero g_0^{(t)} = sup{u ≤ t; X_u = 0}.

use serde::{Deserialize, Serialize};

use crate::error::{domain, FirstError, Result};
use crate::specfun::{gauss_legendre, integrate_panels, QuadratureSpec};

use super::{last_zero_rate, transition_density, HFast, PenaltyWeight, PhaseState};

/// Last zero of X up to the current time; `Never` when the path has not touched 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LastZero {
    Never,
    At(f64),
}

impl LastZero {
    /// The value entering φ(g_0^{(t)}): sup ∅ = 0.
    pub fn time(&self) -> f64 {
        match *self {
            LastZero::Never => 0.0,
            LastZero::At(s) => s,
        }
    }
}

/// ∫_0^{end} φ(t0 + s) m(s; x, y) ds, with m the rate of zeros at time s.
fn future_zero_integral(t0: f64, s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    let end = phi.support_end() - t0;
    if end <= 0.0 {
        return Ok(0.0);
    }
    let mut pts = vec![0.0];
    pts.extend(phi.knots().map(|z| z - t0).filter(|&z| z > 0.0 && z < end));
    pts.push(end);
    let failure = FirstError::default();
    let f = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        phi.value(t0 + r) * failure.capture(last_zero_rate(r, s))
    };
    let v = integrate_panels(f, &pts, spec);
    failure.finish(v)
}

/// Φ(x, y) = φ(0) h̃(x, y) + ∫_0^∞ φ(s) ∫|z|^{3/2} p_s(x, y; 0, z) dz ds.
pub fn phi_cap_lastpassage(s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    if !s.is_finite() {
        return domain(format!("non-finite state {s:?}"));
    }
    let head = phi.value(0.0) * HFast::global().h_reflected(s)?;
    Ok(head + future_zero_integral(0.0, s, phi, spec)?)
}

/// N_t^φ: the part of M_t^φ carried by zeros after t.
pub fn azema_remainder(t: f64, s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("needs t >= 0, got {t}"));
    }
    future_zero_integral(t, s, phi, spec)
}

/// M_t^φ given the last zero so far and the current state (X_t, B_t).
pub fn martingale_lastpassage(
    t: f64,
    g0t: LastZero,
    s: PhaseState,
    phi: &PenaltyWeight,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let g = g0t.time();
    if !(t >= 0.0) || !(0.0..=t).contains(&g) {
        return domain(format!("needs 0 <= g0t <= t, got g0t={g}, t={t}"));
    }
    let head = phi.value(g) * HFast::global().h_reflected(s)?;
    Ok(head + azema_remainder(t, s, phi, spec)?)
}

/// Z_t^φ = N_t^φ / M_t^φ; taken as 0 when M_t^φ = 0.
pub fn azema_ratio(
    t: f64,
    g0t: LastZero,
    s: PhaseState,
    phi: &PenaltyWeight,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let m = martingale_lastpassage(t, g0t, s, phi, spec)?;
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(azema_remainder(t, s, phi, spec)? / m)
}

/// Density of (g_0^{(t)}, X_t, B_t) at (s_split, u, v) for a path that has a zero in (0, t):
/// ∫ |z| p_s(x, y; 0, z) p̄_{t−s}(0, z; u, v) dz, with p̄ supplied by the caller.
///
/// The z-integral uses fixed Gauss–Legendre nodes on mean ± 10 sd of the Gaussian factor,
/// split at 0, so a piecewise-constant estimator for p̄ is handled without adaptivity.
pub fn triplet_density_g0(
    t: f64,
    from: PhaseState,
    s_split: f64,
    to: PhaseState,
    killed_density: &dyn Fn(f64, PhaseState, PhaseState) -> f64,
    _spec: &QuadratureSpec,
) -> Result<f64> {
    if !(s_split > 0.0 && s_split < t) {
        return domain(format!("needs 0 < s < t, got s={s_split}, t={t}"));
    }
    let mean = -(3.0 * from.x / s_split + from.y) / 2.0;
    let sd = (s_split / 4.0).sqrt();
    let (lo, hi) = (mean - 10.0 * sd, mean + 10.0 * sd);
    let (nodes, weights) = gauss_legendre(48);
    let mut pieces = Vec::new();
    if lo < 0.0 && hi > 0.0 {
        pieces.push((lo, 0.0));
        pieces.push((0.0, hi));
    } else {
        pieces.push((lo, hi));
    }
    let r = t - s_split;
    let mut total = 0.0;
    for (a, b) in pieces {
        let (c, w) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in nodes.iter().zip(&weights) {
            let z = c + w * xi;
            let p = transition_density(s_split, from, PhaseState::new(0.0, z))?;
            if p == 0.0 {
                continue;
            }
            total += wi * w * z.abs() * p * killed_density(r, PhaseState::new(0.0, z), to);
        }
    }
    Ok(total)
}
