use std::f64::consts::PI;

use crate::error::{domain, Result};

/// ∫_0^∞ cos(γu) / cosh(πγ/3)^k dγ in closed form.
///
/// Odd k = 2p−1: 2^{2p−3}/(2(p−1))! · 3/cosh(3u/2) · ∏_{r=1}^{p−1} (9u²/4π² + (r−½)²).
/// Even k = 2p: 4^{p−1}/(2π(2p−1)!) · 9u/sinh(3u/2) · ∏_{r=1}^{p−1} (9u²/4π² + r²).
pub fn sech_pow_cos_transform(k: u32, u: f64) -> Result<f64> {
    if k < 1 {
        return domain("sech power must be at least 1");
    }
    if !u.is_finite() {
        return domain("sech transform needs finite u");
    }
    let u = u.abs();
    let c = 9.0 * u * u / (4.0 * PI * PI);
    if k % 2 == 1 {
        let p = k.div_ceil(2);
        let mut prod = 1.0;
        for r in 1..p {
            let s = r as f64 - 0.5;
            prod *= c + s * s;
        }
        let pre = 2f64.powi(2 * p as i32 - 3) / factorial(2 * (p - 1));
        Ok(pre * 3.0 * sech(1.5 * u) * prod)
    } else {
        let p = k / 2;
        let mut prod = 1.0;
        for r in 1..p {
            let s = r as f64;
            prod *= c + s * s;
        }
        let pre = 4f64.powi(p as i32 - 1) / (2.0 * PI * factorial(2 * p - 1));
        Ok(pre * 9.0 * u_over_sinh(1.5, u) * prod)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn sech(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

// u / sinh(c u), with the limit 1/c at u = 0.
fn u_over_sinh(c: f64, u: f64) -> f64 {
    let x = c * u;
    if x.abs() < 1e-4 {
        (1.0 - x * x / 6.0) / c
    } else if x > 700.0 {
        2.0 * u * (-x).exp()
    } else {
        u / x.sinh()
    }
}
