//! Macdonald function of imaginary order, K_{iγ}(a) = ∫_0^∞ e^{-a cosh t} cos(γt) dt.
//!
//! The cosine integral cancels down to e^{-πγ/2} of its integrand scale, so the main entry
//! point integrates along the steepest-descent path of e^{-a cosh t + iγt} instead. With
//! μ = γ/a the path is
//!
//! * μ ≤ 1: t = u + i v(u), sin v = μ u / sinh u, on which the integrand is real;
//! * μ > 1: the segment t = u + iπ/2, 0 ≤ u ≤ u₀ = acosh μ, followed by the descent branch
//!   from the saddle u₀ + iπ/2 on which Im of the exponent stays θ₀ = γu₀ − a sinh u₀.
//!
//! `bessel_k_imag_direct` keeps the plain cosine integral for cross-checks.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{domain, Result};

use super::quad::{integrate_panels, QuadratureSpec};

/// K_{iγ}(a) for a > 0; even in γ.
pub fn bessel_k_imag(gamma: f64, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("bessel_k_imag needs a > 0, got {a}"));
    }
    let g = gamma.abs();
    if !g.is_finite() {
        return domain("bessel_k_imag needs finite order");
    }
    let mu = g / a;
    if mu <= 1.0 {
        below_turning(g, a, mu, spec)
    } else {
        above_turning(g, a, mu, spec)
    }
}

// sinh δ − δ, series below 0.5
fn sinh_minus_id(d: f64) -> f64 {
    if d.abs() < 0.5 {
        let d2 = d * d;
        let mut term = d * d2 / 6.0;
        let mut sum = term;
        for n in 2..9 {
            term *= d2 / ((2 * n) * (2 * n + 1)) as f64;
            sum += term;
        }
        sum
    } else {
        d.sinh() - d
    }
}

// δ cosh δ − sinh δ = Σ 2n δ^{2n+1}/(2n+1)!
fn dcosh_minus_sinh(d: f64) -> f64 {
    if d.abs() < 0.5 {
        let d2 = d * d;
        let mut fact = d * d2 / 6.0;
        let mut sum = 2.0 * fact;
        for n in 2..9 {
            fact *= d2 / ((2 * n) * (2 * n + 1)) as f64;
            sum += (2 * n) as f64 * fact;
        }
        sum
    } else {
        d * d.cosh() - d.sinh()
    }
}

fn below_turning(g: f64, a: f64, mu: f64, spec: &QuadratureSpec) -> Result<f64> {
    let one_minus_mu = (a - g) / a;
    // Exponent on the path; 1 - sin v computed without cancellation.
    let expo = |u: f64| -> f64 {
        let (sv, omsv) = if u == 0.0 {
            (mu, one_minus_mu)
        } else {
            let sh = u.sinh();
            (mu * u / sh, (sinh_minus_id(u) + one_minus_mu * u) / sh)
        };
        let cv = (omsv * (1.0 + sv)).max(0.0).sqrt();
        let v = sv.atan2(cv);
        -a * u.cosh() * cv - g * v
    };
    let e0 = expo(0.0);
    let mut hi = 0.5f64;
    while expo(hi) > e0 - 60.0 && hi < 700.0 {
        hi *= 1.5;
    }
    let mut pts = vec![0.0];
    let n = 12;
    for k in 1..=n {
        pts.push(hi * (k as f64 / n as f64).powi(2));
    }
    // Integrate e^{expo - e0} and restore the scale afterwards.
    let v = integrate_panels(|u| (expo(u) - e0).exp(), &pts, spec)?;
    Ok(v * e0.exp())
}

fn above_turning(g: f64, a: f64, mu: f64, spec: &QuadratureSpec) -> Result<f64> {
    let u0 = mu.acosh();
    let s0 = (mu * mu - 1.0).sqrt();
    let theta0 = g * u0 - a * s0;
    let (st, ct) = theta0.sin_cos();

    // Horizontal segment: ∫_0^{u0} cos(γu − a sinh u) du, panels sized by the largest frequency.
    let nseg = (((g - a) * u0 / PI).ceil() as usize).clamp(1, 100_000);
    let horiz_pts: Vec<f64> = (0..=nseg).map(|k| u0 * k as f64 / nseg as f64).collect();
    let horiz = integrate_panels(|u| (g * u - a * u.sinh()).cos(), &horiz_pts, spec)?;

    // Descent branch, parametrised by u ≥ u0. Returns (g_re, v'(u)) where the integrand
    // modulus is e^{g_re} relative to e^{-γπ/2}.
    let branch = |u: f64| -> (f64, f64) {
        let d = u - u0;
        let dd = u.sinh();
        let e = s0 * 2.0 * (0.5 * d).sinh().powi(2) + mu * sinh_minus_id(d);
        let r = (e / (2.0 * dd)).clamp(0.0, 1.0);
        let phi = 2.0 * r.sqrt().asin();
        let sphi = phi.sin();
        let p = -(dcosh_minus_sinh(d) + s0 * d * dd);
        let vp = if sphi > 0.0 {
            p / (dd * dd * sphi)
        } else {
            -1.0
        };
        (g * phi - a * u.cosh() * sphi, vp)
    };
    let width = 1.0 / (a * s0 + 1.0).sqrt();
    let mut pts = vec![u0];
    let mut step = 0.25 * width;
    let mut u = u0;
    loop {
        u += step;
        pts.push(u);
        if branch(u).0 < -60.0 || u > u0 + 700.0 {
            break;
        }
        step *= 1.6;
    }
    let desc = integrate_panels(
        |u| {
            let (gr, vp) = branch(u);
            gr.exp() * (ct - st * vp)
        },
        &pts,
        spec,
    )?;
    Ok((-g * FRAC_PI_2).exp() * (horiz + desc))
}

/// K_{iγ}(a) from the cosine integral, truncated where a·cosh t > 745 and split at the
/// zeros of cos(γt). Loses about e^{πγ/2} in relative accuracy; meant for moderate γ.
pub fn bessel_k_imag_direct(gamma: f64, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return domain(format!("bessel_k_imag needs a > 0, got {a}"));
    }
    let g = gamma.abs();
    let tstar = if a < 745.0 { (745.0 / a).acosh() } else { 1.0 };
    let mut pts = vec![0.0];
    if g > 0.0 {
        let mut k = 0usize;
        loop {
            let t = (k as f64 + 0.5) * PI / g;
            if t >= tstar || k > 200_000 {
                break;
            }
            pts.push(t);
            k += 1;
        }
    }
    if pts.len() < 8 {
        pts = (0..=8).map(|k| tstar * k as f64 / 8.0).collect();
    } else {
        pts.push(tstar);
    }
    integrate_panels(|t| (-a * t.cosh()).exp() * (g * t).cos(), &pts, spec)
}
