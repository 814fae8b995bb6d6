//! Passage-time laws: the n-th zero of X from (0, b), and hitting of levels under the
//! conditioned measure Q.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::specfun::{erf, QuadratureSpec};

use super::asymptotics::{i_k_quadrature, i_k_sech_route, lebedev_f_closed};
use super::{h_eval, PhaseState};

/// J_n(a) = ∫_0^∞ K_{iγ}(a) γ sinh(πγ)/(2cosh(πγ/3))^n dγ.
///
/// Uses sinh(3x) = sinh x (4cosh²x − 1), so J_n = 2^{2−n} I_{n−2} − 2^{−n} I_n, with the
/// I_k from their cosine-transform form. At n = 1 the integral diverges; the I_{−1} piece
/// takes its analytically continued value (√3π/8) a e^{a/2}.
pub fn nth_passage_kernel(n: u32, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    nth_passage_kernel_scaled(n, a, 0.0, spec)
}

// J_n(a)·e^{-shift}, keeping the e^{a/2} growth at n = 1 inside one exponent.
fn nth_passage_kernel_scaled(n: u32, a: f64, shift: f64, spec: &QuadratureSpec) -> Result<f64> {
    if n == 0 {
        return domain("passage index starts at 1");
    }
    if !(a > 0.0) {
        return domain(format!("kernel needs a > 0, got {a}"));
    }
    if n == 1 {
        let cont = 3f64.sqrt() * PI / 4.0 * a * (a / 2.0 - shift).exp();
        return Ok(cont - 0.5 * i_k_sech_route(1, a, spec)? * (-shift).exp());
    }
    let lower = if n == 2 {
        lebedev_f_closed(a)
    } else {
        i_k_sech_route(n - 2, a, spec)?
    };
    let upper = i_k_sech_route(n, a, spec)?;
    Ok((2f64.powi(2 - n as i32) * lower - 2f64.powi(-(n as i32)) * upper) * (-shift).exp())
}

/// J_n(a) by direct γ-quadrature over K_{iγ} (n ≥ 2), or with the continued piece at n = 1.
pub fn nth_passage_kernel_direct(n: u32, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    use crate::specfun::{bessel_k_imag, integrate_panels};
    if n == 0 {
        return domain("passage index starts at 1");
    }
    if n == 1 {
        let cont = 3f64.sqrt() * PI / 4.0 * a * (a / 2.0).exp();
        return Ok(cont - 0.5 * i_k_quadrature(1, a, spec)?);
    }
    let rate = PI * (n as f64 / 3.0 - 0.5);
    let gmax = a + 46.0 / rate;
    let inner = QuadratureSpec::tight();
    let f = |g: f64| {
        let x = PI * g / 3.0;
        // sinh(3x)/(2cosh x)^n without overflow.
        let w = 0.5 * ((3.0 - n as f64) * x).exp() * -(-6.0 * x).exp_m1() / (1.0 + (-2.0 * x).exp()).powi(n as i32);
        g * w * bessel_k_imag(g, a, &inner).unwrap_or(f64::NAN)
    };
    let m = gmax.ceil() as usize;
    let pts: Vec<f64> = (0..=m).map(|i| i as f64 * gmax / m as f64).collect();
    integrate_panels(f, &pts, spec)
}

/// Density of (T_0^{(n)}, |B_{T_0^{(n)}}|/√T_0^{(n)}) from (0, b) at (t, z).
///
/// The Macdonald-function display is a density in (t, |B|); the factor √t converts it to
/// the normalised variable z = |B|/√t.
pub fn nth_passage_joint_density(n: u32, b: f64, t: f64, z: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(b > 0.0 && t > 0.0 && z > 0.0) {
        return domain(format!("density needs b, t, z > 0, got b={b}, t={t}, z={z}"));
    }
    let a = 4.0 * b * z / t.sqrt();
    let e = 2.0 * b * b / t + 2.0 * z * z;
    let j = nth_passage_kernel_scaled(n, a, e, spec)?;
    Ok(t.sqrt() / (PI * PI * b * t) * j)
}

/// McKean's density of (T_0, |B_{T_0}|) from (0, b), b ≠ 0, at (t, w).
pub fn first_passage_density_mckean(t: f64, b: f64, w: f64) -> Result<f64> {
    if !(t > 0.0) || b == 0.0 || w < 0.0 {
        return domain(format!("needs t > 0, b != 0, w >= 0; got t={t}, b={b}, w={w}"));
    }
    let b = b.abs();
    let e = -2.0 / t * (b * b - b * w + w * w);
    Ok(3.0 * w / (PI * 2f64.sqrt() * t * t) * e.exp() * (2.0f64 / 3.0).sqrt() * erf((6.0 * b * w / t).sqrt()))
}

/// Q_{(x,y)}(T_a < ∞) = 1 − h(x−a, y)/h(x, y) for 0 ≤ a < x.
pub fn q_hit_probability(s: PhaseState, a: f64) -> Result<f64> {
    if !(a >= 0.0 && a < s.x) {
        return domain(format!("needs 0 <= a < x, got a={a}, x={}", s.x));
    }
    Ok(1.0 - h_eval(PhaseState::new(s.x - a, s.y))? / h_eval(s)?)
}

/// E_{(x,y)}[h(a, B_{T_a})] = h(x, y) − h(x−a, y), a < x.
pub fn lemma_hbta_rhs(s: PhaseState, a: f64) -> Result<f64> {
    if !(a < s.x) {
        return domain(format!("needs a < x, got a={a}, x={}", s.x));
    }
    Ok(h_eval(s)? - h_eval(PhaseState::new(s.x - a, s.y))?)
}

/// Q_{(a,y)}(T_a ∈ dt, B_{T_a} ∈ dz)/(dt dz) for a, y > 0 and z ≤ 0.
pub fn qa_selfstart_density(a: f64, y: f64, t: f64, z: f64) -> Result<f64> {
    if !(a > 0.0 && y > 0.0 && t > 0.0 && z <= 0.0) {
        return domain(format!("needs a, y, t > 0 and z <= 0; got a={a}, y={y}, t={t}, z={z}"));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let ratio = h_eval(PhaseState::new(a, z))? / h_eval(PhaseState::new(a, y))?;
    Ok(ratio * first_passage_density_mckean(t, y, -z)?)
}
