use crate::error::{domain, Result};

use super::gamma::ln_gamma;
use super::quad::{integrate_panels, QuadratureSpec};

/// Tricomi confluent hypergeometric function U(a, b, z) for a > 0, z > 0.
///
/// Uses U = z^{-a}/Γ(a) ∫_0^∞ e^{-s} s^{a-1} (1 + s/z)^{b-a-1} ds with s = u^6, so that for
/// the sixth-integer parameters in use the integrand is a smooth function of u.
pub fn hyp_u(a: f64, b: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return domain(format!("hyp_u needs z > 0, got {z}"));
    }
    if !(a > 0.0) {
        return domain(format!("hyp_u needs a > 0, got {a}"));
    }
    if z >= 30.0 {
        if let Some(v) = asymptotic(a, b, z) {
            return Ok(v);
        }
    }
    let p = 6.0 * a - 1.0;
    let q = b - a - 1.0;
    let f = |u: f64| {
        if u == 0.0 {
            return if p == 0.0 { 1.0 } else { 0.0 };
        }
        let s = u.powi(6);
        let lw = p * u.ln() - s + q * (s / z).ln_1p();
        lw.exp()
    };
    // e^{-u^6} < 1e-280 beyond this cut.
    let upper = 2.95;
    let mut pts = vec![0.0];
    // Resolve the knee of (1 + u^6/z)^q at u ≈ z^{1/6} when z is small.
    let knee = z.powf(1.0 / 6.0);
    if knee < 0.5 {
        let mut k = knee * 0.25;
        while k < 0.5 {
            pts.push(k);
            k *= 4.0;
        }
    }
    pts.extend([0.5, 1.0, 1.5, 2.0, upper]);
    let integral = integrate_panels(f, &pts, spec)?;
    Ok(6.0 * integral * (-a * z.ln() - ln_gamma(a)?).exp())
}

// z^{-a} Σ (a)_k (a−b+1)_k / (k! (−z)^k), accepted only if it reaches roundoff before the
// terms start to grow.
fn asymptotic(a: f64, b: f64, z: f64) -> Option<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..200 {
        let k = k as f64;
        let next = term * (a + k) * (a - b + 1.0 + k) / ((k + 1.0) * -z);
        if next.abs() > term.abs() && next != 0.0 {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Some(sum * z.powf(-a));
        }
    }
    None
}
