//! Penalization by a function of the running supremum S_t = sup_{u≤t} X_u.
//!
//! For piecewise-linear φ, integrating by parts turns
//! φ(S)h(S−X, −B) + ∫_S^∞ φ(z) ∂_z h(z−X, −B) dz into −∫_S^∞ φ′(z) h(z−X, −B) dz.
//! Near z = X, h(z−X, ·) behaves like (z−X)^{1/6}, so integrals run in ρ with z = X + ρ⁶.

use crate::error::{domain, FirstError, Result};
use crate::specfun::{integrate_panels, QuadratureSpec};

use super::{h_grad, HFast, PenaltyWeight, PhaseState};

// −∫_{from}^∞ φ′(z) [h(z−x, −y) − offset] dz, from ≥ x.
fn by_parts_tail(from: f64, s: PhaseState, offset: f64, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    let table = HFast::global();
    let mut total = 0.0;
    for (z0, z1, slope) in phi.pieces() {
        let lo = z0.max(from);
        if slope == 0.0 || z1 <= lo {
            continue;
        }
        let (r0, r1) = ((lo - s.x).powf(1.0 / 6.0), (z1 - s.x).powf(1.0 / 6.0));
        let failure = FirstError::default();
        let f = |r: f64| {
            let r2 = r * r;
            let r5 = r2 * r2 * r;
            (failure.capture(table.h(PhaseState::new(r5 * r, -s.y))) - offset) * 6.0 * r5
        };
        let v = integrate_panels(f, &[r0, r1], spec);
        total -= slope * failure.finish(v)?;
    }
    Ok(total)
}

/// Φ(x, y) = φ(x)h(0, −y) + ∫_x^∞ φ(z) ∂_z h(z−x, −y) dz, by parts.
pub fn phi_cap_supremum(s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    if !s.is_finite() {
        return domain(format!("non-finite state {s:?}"));
    }
    by_parts_tail(s.x, s, 0.0, phi, spec)
}

/// Φ from the displayed form, using ∂_x h directly (independent of the by-parts route).
pub fn phi_cap_supremum_direct(s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    if !s.is_finite() {
        return domain(format!("non-finite state {s:?}"));
    }
    let atom = phi.value(s.x) * (-s.y).max(0.0).sqrt();
    let end = phi.support_end();
    if end <= s.x {
        return Ok(atom);
    }
    let mut pts: Vec<f64> = vec![0.0];
    pts.extend(
        phi.knots()
            .filter(|&z| z > s.x && z < end)
            .map(|z| (z - s.x).powf(1.0 / 6.0)),
    );
    pts.push((end - s.x).powf(1.0 / 6.0));
    let failure = FirstError::default();
    let f = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let r2 = r * r;
        let r5 = r2 * r2 * r;
        let dx = failure.capture(h_grad(PhaseState::new(r5 * r, -s.y)).map(|g| g.0));
        phi.value(s.x + r5 * r) * dx * 6.0 * r5
    };
    let v = integrate_panels(f, &pts, spec);
    Ok(atom + failure.finish(v)?)
}

/// M_u^φ from the running supremum `s_run` and the current state (X_u, B_u).
pub fn martingale_supremum(s_run: f64, s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    if !(s_run >= s.x) {
        return domain(format!("running supremum {s_run} below position {}", s.x));
    }
    by_parts_tail(s_run, s, 0.0, phi, spec)
}

/// ∫_c^∞ φ(z) ∂_z h(z−x, −y) dz for c ≥ x. Stopped at the first passage of X at c,
/// this is a martingale under P.
pub fn s_infinity_tail_mass(s: PhaseState, phi: &PenaltyWeight, c: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(c >= s.x) {
        return domain(format!("needs c >= x, got c={c}, x={}", s.x));
    }
    if c >= phi.support_end() {
        return Ok(0.0);
    }
    let base = HFast::global().h(PhaseState::new(c - s.x, -s.y))?;
    by_parts_tail(c, s, base, phi, spec)
}

/// Q^φ_{(x,y)}(S_∞ > c) = ∫_c^∞ φ(z) ∂_z h(z−x, −y) dz / Φ(x, y), c > x.
pub fn s_infinity_law(s: PhaseState, phi: &PenaltyWeight, c: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(c > s.x) {
        return domain(format!("needs c > x, got c={c}, x={}", s.x));
    }
    let tail = s_infinity_tail_mass(s, phi, c, spec)?;
    if tail == 0.0 {
        return Ok(0.0);
    }
    Ok(tail / phi_cap_supremum(s, phi, spec)?)
}

/// Q^φ_{(x,y)}(S_∞ = x) = φ(x) h(0, −y)/Φ(x, y).
pub fn s_infinity_atom(s: PhaseState, phi: &PenaltyWeight, spec: &QuadratureSpec) -> Result<f64> {
    let atom = phi.value(s.x) * (-s.y).max(0.0).sqrt();
    if atom == 0.0 {
        return Ok(0.0);
    }
    Ok(atom / phi_cap_supremum(s, phi, spec)?)
}
