//! Large-time asymptotics of passage times and the small-argument law of the
//! Macdonald-function integrals
//! I_k(a) = ∫_0^∞ γ K_{iγ}(a) sinh(πγ/3)/cosh^k(πγ/3) dγ.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::specfun::{bessel_k_imag, gamma, integrate_panels, ln_gamma, sech_pow_cos_transform, QuadratureSpec};

use super::{h_eval, PhaseState};

/// C = 3Γ(1/4)/(2^{3/4}π^{3/2}) in P(T_0 > t) ~ C h(x, y) t^{-1/4}.
pub fn survival_constant() -> f64 {
    3.0 * gamma(0.25).unwrap() / (2f64.powf(0.75) * PI.powf(1.5))
}

/// Leading term C h(x, y) t^{-1/4}; admissible starts are x > 0, or x = 0 with y > 0.
pub fn survival_asymptotic(t: f64, s: PhaseState) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("survival asymptotic needs t > 0, got {t}"));
    }
    if !(s.x > 0.0 || (s.x == 0.0 && s.y > 0.0)) {
        return domain(format!("inadmissible start {s:?}"));
    }
    Ok(survival_constant() * h_eval(s)? * t.powf(-0.25))
}

/// P_{(0,b)}(T_0^{(n)} > t) ~ leading_constant · (ln t)^{log_power} · t^{time_power}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoeffs {
    pub n: u32,
    pub leading_constant: f64,
    pub log_power: u32,
    pub time_power: f64,
}

impl AsymptoticCoeffs {
    pub fn nth_passage(n: u32, b: f64) -> Result<Self> {
        if n == 0 {
            return domain("passage index starts at 1");
        }
        if b == 0.0 || !b.is_finite() {
            return domain(format!("nth passage asymptotic needs b != 0, got {b}"));
        }
        let fact = ln_gamma(n as f64)?.exp();
        let c = 2f64.powf(0.25) * gamma(0.25)? * b.abs().sqrt() / (PI.sqrt() * fact)
            * (9.0 / (4.0 * PI * PI)).powf(n as f64 / 2.0);
        Ok(AsymptoticCoeffs {
            n,
            leading_constant: c,
            log_power: n - 1,
            time_power: -0.25,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.leading_constant * t.ln().powi(self.log_power as i32) * t.powf(self.time_power)
    }
}

pub fn nth_passage_asymptotic(t: f64, n: u32, b: f64) -> Result<f64> {
    if !(t > 1.0) {
        return domain(format!("nth passage asymptotic needs t > 1, got {t}"));
    }
    Ok(AsymptoticCoeffs::nth_passage(n, b)?.eval(t))
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("needs a > 0, got {a}"));
    }
    Ok(())
}

/// I_k(a) by quadrature in γ over the contour-evaluated K_{iγ}(a).
pub fn i_k_quadrature(k: u32, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_a(a)?;
    // Decay rate in γ of K_{iγ}(a)·sinh/cosh^k: e^{-πγ/2} against e^{(1-k)πγ/3}.
    let rate = PI / 2.0 + (k as f64 - 1.0) * PI / 3.0;
    let gmax = a + 46.0 / rate;
    let inner = QuadratureSpec::tight();
    let f = |g: f64| {
        let x = PI * g / 3.0;
        let w = if k == 0 {
            x.sinh()
        } else {
            x.tanh() / x.cosh().powi(k as i32 - 1)
        };
        g * w * bessel_k_imag(g, a, &inner).unwrap_or(f64::NAN)
    };
    let n = gmax.ceil() as usize;
    let pts: Vec<f64> = (0..=n).map(|i| i as f64 * gmax / n as f64).collect();
    integrate_panels(f, &pts, spec)
}

/// ∫γK_{iγ}(a) sinh(πγ/3) dγ by quadrature.
pub fn lebedev_f(a: f64, spec: &QuadratureSpec) -> Result<f64> {
    i_k_quadrature(0, a, spec)
}

/// The closed form πa/√3 · e^{-a/2} as printed.
pub fn lebedev_f_stated(a: f64) -> f64 {
    PI * a / 3f64.sqrt() * (-a / 2.0).exp()
}

/// (√3π/4) a e^{-a/2}, the value of ∫γK_{iγ}(a) sinh(πγ/3) dγ.
pub fn lebedev_f_closed(a: f64) -> f64 {
    3f64.sqrt() * PI / 4.0 * a * (-a / 2.0).exp()
}

/// u-space kernel G_k with I_k(a) = a e^{-a} ∫_0^∞ e^{-a(cosh u - 1)} G_k(u) du, k ≥ 1.
fn g_kernel(k: u32, u: f64) -> f64 {
    if k == 1 {
        if u < 1e-6 {
            return 1.0 - 5.0 / 24.0 * u * u;
        }
        if u > 600.0 {
            return 3.0 * (-0.5 * u).exp();
        }
        1.5 * u.sinh() / (1.5 * u).sinh()
    } else {
        let s = sech_pow_cos_transform(k - 1, u).unwrap_or(f64::NAN);
        3.0 * u / (PI * (k as f64 - 1.0)) * s * u.sinh()
    }
}

fn kernel_panels(k: u32, a: f64) -> Vec<f64> {
    let tail = 110.0 + 6.0 * k as f64;
    // e^{-a(cosh u - 1)} underflows beyond acosh(1 + 745/a).
    let cut = (1.0 + 745.0 / a).acosh();
    let end = tail.min(cut);
    let mut pts = vec![0.0];
    let mut u: f64 = 0.5;
    while u < end {
        pts.push(u);
        u += if u < 4.0 { 0.5 } else { 2.0 };
    }
    pts.push(end);
    pts
}

/// I_k(a), k ≥ 1, from the cosine-transform closed forms (no Bessel evaluations).
pub fn i_k_sech_route(k: u32, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_a(a)?;
    if k == 0 {
        return Ok(lebedev_f_closed(a));
    }
    let f = |u: f64| {
        let d = 2.0 * (0.5 * u).sinh().powi(2);
        (-a * d).exp() * g_kernel(k, u)
    };
    Ok(a * (-a).exp() * integrate_panels(f, &kernel_panels(k, a), spec)?)
}

/// I_k(a) − a e^{-a} α_k, computed without cancellation.
pub fn i_k_remainder(k: u32, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_a(a)?;
    if k == 0 {
        return Ok(lebedev_f_closed(a) - a * alpha_k(0, spec)?);
    }
    let f = |u: f64| {
        let d = 2.0 * (0.5 * u).sinh().powi(2);
        -(-a * d).exp_m1() * g_kernel(k, u)
    };
    let pts = kernel_panels(k, 1e-300);
    Ok(-a * (-a).exp() * integrate_panels(f, &pts, spec)?)
}

/// C_{k-1} = ∫_0^∞ Γ_{k-1}(Argcosh(1 + s)) ds for k ≥ 2; C_0 = ∫ sinh u / sinh(3u/2) du for k = 1.
pub fn c_k_minus_1(k: u32, spec: &QuadratureSpec) -> Result<f64> {
    if k == 0 {
        return domain("C_{k-1} needs k >= 1");
    }
    let pts = kernel_panels(k, 1e-300);
    let v = integrate_panels(|u| g_kernel(k, u), &pts, spec)?;
    Ok(if k == 1 { v / 1.5 } else { v })
}

/// Coefficient of a in I_k(a) as a → 0; α_0 = √3π/4.
pub fn alpha_k(k: u32, spec: &QuadratureSpec) -> Result<f64> {
    match k {
        0 => Ok(3f64.sqrt() * PI / 4.0),
        1 => Ok(1.5 * c_k_minus_1(1, spec)?),
        _ => c_k_minus_1(k, spec),
    }
}

/// β̃_k in I_k(a) = α_k a − β̃_k a^{3/2}(−ln a)^{k−1} + o(·) as a → 0.
pub fn beta_k_small_a(k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let fact = ln_gamma(k as f64).unwrap().exp();
    9.0 * 2f64.powi(k as i32 - 3) / (2f64.sqrt() * PI.sqrt() * fact)
        * (9.0 / (4.0 * PI * PI)).powf(k as f64 / 2.0 - 1.0)
}

/// β_k in the large-t form α_k/√t − β_k (ln t)^{k−1}/t^{3/4} with a = 4/√t (b = z = 1).
pub fn beta_k(k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let fact = ln_gamma(k as f64).unwrap().exp();
    9.0 * 2f64.sqrt() / (PI.sqrt() * fact) * (9.0 / (4.0 * PI * PI)).powf(k as f64 / 2.0 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_related_by_a_equals_four_over_sqrt_t() {
        for k in 1..6 {
            let ratio = beta_k(k) / beta_k_small_a(k);
            assert!((ratio - 2f64.powi(4 - k as i32)).abs() < 1e-13 * ratio);
        }
        assert!((beta_k_small_a(1) - 3.0 * PI.sqrt() / (2.0 * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn kernel_small_u_branch_is_continuous() {
        let a = g_kernel(1, 0.99e-6);
        let b = g_kernel(1, 1.01e-6);
        assert!((a - b).abs() < 1e-11);
    }
}
