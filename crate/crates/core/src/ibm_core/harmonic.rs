//! The harmonic function h and the conditioned drift ∂_y h / h.
//!
//! With w = y/x^{1/3}, h(x, y) = x^{1/6} H(w) where, writing U₁ = U(1/6, 4/3, ·),
//! U₄ = U(7/6, 4/3, ·), U₇ = U(7/6, 7/3, ·):
//!
//! * w > 0: H = (2/9)^{1/6} w U₁(ζ), ζ = (2/9)w³,
//! * w = 0: H = (9/2)^{1/6} Γ(1/3)/Γ(1/6),
//! * w < 0: H = (2/9)^{1/6}/6 · |w| e^{−η} U₄(η), η = (2/9)|w|³,
//!
//! and H″ = (2/3)w²H′ − (w/3)H. Derivatives use U′(a, b, z) = U(a, b, z) − U(a, b + 1, z).

use std::sync::OnceLock;

use crate::error::{domain, Result};
use crate::specfun::{gamma, hyp_u, QuadratureSpec};

use super::PhaseState;

/// Half-width of the band |w| < BAND in which ∂_w H comes from central differences.
const BAND: f64 = 1e-3;
const FD_STEP: f64 = 2e-4;

fn c_pos() -> f64 {
    (2.0f64 / 9.0).powf(1.0 / 6.0)
}

fn h_at_zero() -> f64 {
    4.5f64.powf(1.0 / 6.0) * gamma(1.0 / 3.0).unwrap() / gamma(1.0 / 6.0).unwrap()
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::tight()
}

/// ln H(w).
fn ln_big_h(w: f64) -> Result<f64> {
    let s = spec();
    if w > 0.0 {
        let z = 2.0 / 9.0 * w * w * w;
        if z > 1e30 {
            return Ok(0.5 * w.ln());
        }
        Ok(c_pos().ln() + w.ln() + hyp_u(1.0 / 6.0, 4.0 / 3.0, z, &s)?.ln())
    } else if w < 0.0 {
        let eta = -2.0 / 9.0 * w * w * w;
        if eta > 1e30 {
            // U₄(η) ~ η^{-7/6}.
            return Ok((c_pos() / 6.0).ln() + (-w).ln() - eta - 7.0 / 6.0 * eta.ln());
        }
        Ok((c_pos() / 6.0).ln() + (-w).ln() - eta + hyp_u(7.0 / 6.0, 4.0 / 3.0, eta, &s)?.ln())
    } else {
        Ok(h_at_zero().ln())
    }
}

fn big_h(w: f64) -> Result<f64> {
    ln_big_h(w).map(f64::exp)
}

/// D(w) = H′(w)/H(w).
fn big_d(w: f64) -> Result<f64> {
    let s = spec();
    if w.abs() < BAND {
        let hp = (big_h(w + FD_STEP)? - big_h(w - FD_STEP)?) / (2.0 * FD_STEP);
        return Ok(hp / big_h(w)?);
    }
    if w > 0.0 {
        let z = 2.0 / 9.0 * w * w * w;
        if z > 1e30 {
            return Ok(0.5 / w);
        }
        let u1 = hyp_u(1.0 / 6.0, 4.0 / 3.0, z, &s)?;
        let u7 = hyp_u(7.0 / 6.0, 7.0 / 3.0, z, &s)?;
        Ok((1.0 - 0.5 * z * u7 / u1) / w)
    } else {
        let eta = -2.0 / 9.0 * w * w * w;
        if eta > 1e30 {
            return Ok((3.0 * eta - 1.0) / -w);
        }
        let u4 = hyp_u(7.0 / 6.0, 4.0 / 3.0, eta, &s)?;
        let u7 = hyp_u(7.0 / 6.0, 7.0 / 3.0, eta, &s)?;
        Ok((3.0 * eta * u7 / u4 - 1.0) / -w)
    }
}

fn check_state(s: PhaseState) -> Result<()> {
    if !s.is_finite() {
        return domain(format!("non-finite state {s:?}"));
    }
    if s.x < 0.0 {
        return domain(format!("h needs x >= 0 (reflect first), got x = {}", s.x));
    }
    Ok(())
}

/// h(x, y) for x ≥ 0.
pub fn h_eval(s: PhaseState) -> Result<f64> {
    check_state(s)?;
    if s.x == 0.0 {
        return Ok(s.y.max(0.0).sqrt());
    }
    let cx = s.x.cbrt();
    let w = s.y / cx;
    if !w.is_finite() {
        return Ok(s.y.max(0.0).sqrt());
    }
    Ok((ln_big_h(w)? + s.x.ln() / 6.0).exp())
}

/// h(x, y) on {x > 0}, h(−x, −y) on {x < 0}, and √|y| at x = 0: the weight of the
/// last-passage martingale.
pub fn h_reflected(s: PhaseState) -> Result<f64> {
    if s.x > 0.0 {
        h_eval(s)
    } else if s.x < 0.0 {
        h_eval(s.mirrored())
    } else {
        Ok(s.y.abs().sqrt())
    }
}

/// (∂h/∂x, ∂h/∂y) for x > 0.
pub fn h_grad(s: PhaseState) -> Result<(f64, f64)> {
    check_state(s)?;
    if s.x == 0.0 {
        return domain("h_grad needs x > 0");
    }
    let cx = s.x.cbrt();
    let w = s.y / cx;
    let hh = big_h(w)?;
    let hp = hh * big_d(w)?;
    let dy = hp / s.x.powf(1.0 / 6.0);
    let dx = (hh / 6.0 - w * hp / 3.0) / s.x.powf(5.0 / 6.0);
    Ok((dx, dy))
}

/// Drift ∂_y h / h of the velocity under the conditioned law, x > 0.
pub fn conditioned_drift(s: PhaseState) -> Result<f64> {
    check_state(s)?;
    if s.x == 0.0 {
        return domain("conditioned drift needs x > 0");
    }
    let cx = s.x.cbrt();
    Ok(big_d(s.y / cx)? / cx)
}

/// Tabulated ln H and D = H′/H on |w| ≤ W_TAB with cubic Hermite interpolation; outside,
/// the U functions reach their large-argument regime and are evaluated directly.
pub struct HFast {
    lo: f64,
    inv_step: f64,
    step: f64,
    // (ln H, D, D′) at each node; (ln H)′ = D.
    nodes: Vec<[f64; 3]>,
}

const W_TAB: f64 = 5.75;
const TAB_STEP: f64 = 1.0 / 256.0;

impl HFast {
    pub fn build() -> Result<Self> {
        let n = (2.0 * W_TAB / TAB_STEP).round() as usize;
        let lo = -W_TAB;
        let mut nodes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let w = lo + i as f64 * TAB_STEP;
            let l = ln_big_h(w)?;
            let d = big_d(w)?;
            let dp = 2.0 / 3.0 * w * w * d - w / 3.0 - d * d;
            nodes.push([l, d, dp]);
        }
        Ok(HFast {
            lo,
            inv_step: 1.0 / TAB_STEP,
            step: TAB_STEP,
            nodes,
        })
    }

    /// Process-wide table, built on first use.
    pub fn global() -> &'static HFast {
        static TABLE: OnceLock<HFast> = OnceLock::new();
        TABLE.get_or_init(|| HFast::build().expect("h table construction"))
    }

    /// (ln H(w), D(w)).
    pub fn ln_h_and_d(&self, w: f64) -> Result<(f64, f64)> {
        if w.abs() >= W_TAB || !w.is_finite() {
            return Ok((ln_big_h(w)?, big_d(w)?));
        }
        let u = (w - self.lo) * self.inv_step;
        let i = (u.floor() as usize).min(self.nodes.len() - 2);
        let t = u - i as f64;
        let a = &self.nodes[i];
        let b = &self.nodes[i + 1];
        let h = self.step;
        let (h00, h10, h01, h11) = hermite(t);
        let l = h00 * a[0] + h10 * h * a[1] + h01 * b[0] + h11 * h * b[1];
        let d = h00 * a[1] + h10 * h * a[2] + h01 * b[1] + h11 * h * b[2];
        Ok((l, d))
    }

    pub fn h(&self, s: PhaseState) -> Result<f64> {
        check_state(s)?;
        if s.x == 0.0 {
            return Ok(s.y.max(0.0).sqrt());
        }
        let w = s.y / s.x.cbrt();
        if !w.is_finite() {
            return Ok(s.y.max(0.0).sqrt());
        }
        let (l, _) = self.ln_h_and_d(w)?;
        Ok((l + s.x.ln() / 6.0).exp())
    }

    pub fn drift(&self, s: PhaseState) -> Result<f64> {
        check_state(s)?;
        if s.x == 0.0 {
            return domain("conditioned drift needs x > 0");
        }
        let cx = s.x.cbrt();
        let (_, d) = self.ln_h_and_d(s.y / cx)?;
        Ok(d / cx)
    }

    /// h of the reflected state, as in `h_reflected`.
    pub fn h_reflected(&self, s: PhaseState) -> Result<f64> {
        if s.x > 0.0 {
            self.h(s)
        } else if s.x < 0.0 {
            self.h(s.mirrored())
        } else {
            Ok(s.y.abs().sqrt())
        }
    }
}

fn hermite(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0, t3 - 2.0 * t2 + t, -2.0 * t3 + 3.0 * t2, t3 - t2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_continuous_at_zero() {
        let h0 = big_h(0.0).unwrap();
        assert!((big_h(1e-9).unwrap() / h0 - 1.0).abs() < 1e-8);
        assert!((big_h(-1e-9).unwrap() / h0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn drift_continuous_across_band() {
        for &edge in &[BAND, -BAND] {
            let inside = big_d(edge * 0.999).unwrap();
            let outside = big_d(edge * 1.001).unwrap();
            assert!((inside - outside).abs() < 1e-5, "{inside} {outside}");
        }
    }
}
