use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::specfun::gamma;

use super::PhaseState;

/// Gaussian transition density p_t(x, y; u, v) of (X, B).
pub fn transition_density(t: f64, from: PhaseState, to: PhaseState) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("transition density needs t > 0, got {t}"));
    }
    let dx = to.x - from.x;
    let e = -6.0 * dx * dx / (t * t * t) + 6.0 * dx * (to.y + from.y) / (t * t)
        - 2.0 * (to.y * to.y + to.y * from.y + from.y * from.y) / t;
    Ok(3f64.sqrt() / (PI * t * t) * e.exp())
}

/// q_t(x, y; u, v) = p_t(x, y; u, v) − p_t(x, y; u, −v).
pub fn q_density(t: f64, from: PhaseState, to: PhaseState) -> Result<f64> {
    let a = transition_density(t, from, to)?;
    let b = transition_density(t, from, PhaseState::new(to.x, -to.y))?;
    Ok(a - b)
}

/// E|Z|^{3/2} for Z ~ N(c, var).
pub fn abs_moment_gaussian(c: f64, var: f64) -> f64 {
    let sigma = var.sqrt();
    let q = c * c / (2.0 * var);
    if q <= 200.0 {
        // E|Z|^p = σ^p 2^{p/2} Γ((p+1)/2)/√π · e^{-q} M(p/2 + 1/2, 1/2, q) after Kummer's transformation.
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 0.0;
        loop {
            term *= (1.25 + n) / (0.5 + n) * q / (n + 1.0);
            sum += term;
            n += 1.0;
            if term < 1e-17 * sum {
                break;
            }
        }
        let g54 = gamma(1.25).expect("positive argument");
        sigma.powf(1.5) * 2f64.powf(0.75) * g54 / PI.sqrt() * (-q).exp() * sum
    } else {
        // |c|^{3/2} Σ_k C(3/2, 2k) (2k−1)!! (var/c²)^k; the far-side mass is below e^{-200}.
        let r = var / (c * c);
        let mut binom = 1.0;
        let mut dfact = 1.0;
        let mut rk = 1.0;
        let mut sum = 1.0;
        for k in 1..=6 {
            let j = 2.0 * k as f64;
            binom *= (1.5 - (j - 2.0)) * (1.5 - (j - 1.0)) / ((j - 1.0) * j);
            dfact *= j - 1.0;
            rk *= r;
            sum += binom * dfact * rk;
        }
        c.abs().powf(1.5) * sum
    }
}

/// ∫ |z|^{3/2} p_s(x, y; 0, z) dz, the kernel of the last-passage normalisations.
///
/// In z the density is Gaussian with mean −(3x/s + y)/2 and variance s/4, so the integral
/// reduces to an absolute moment.
pub fn last_zero_rate(s: f64, from: PhaseState) -> Result<f64> {
    if !(s > 0.0) {
        return domain(format!("kernel needs s > 0, got {s}"));
    }
    let (x, y) = (from.x, from.y);
    let e = -1.5 * (x + y * s).powi(2) / (s * s * s);
    if e < -745.0 {
        return Ok(0.0);
    }
    let c = -(3.0 * x / s + y) / 2.0;
    Ok((1.5 / (PI * s * s * s)).sqrt() * e.exp() * abs_moment_gaussian(c, s / 4.0))
}
