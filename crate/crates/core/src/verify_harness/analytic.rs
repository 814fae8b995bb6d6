//! Checks without Monte Carlo. Their tolerances are at most 1e-6, so a failure here is a
//! defect in a formula or in the code, never noise.

use std::f64::consts::PI;

use serde_json::json;

use crate::error::Result;
use crate::ibm_core::{
    alpha_k, beta_k_small_a, c_k_minus_1, first_passage_density_mckean, h_eval, i_k_quadrature, i_k_remainder, i_k_sech_route,
    lebedev_f, lebedev_f_closed, lebedev_f_stated, nth_passage_asymptotic, nth_passage_joint_density, q_density,
    survival_asymptotic, survival_constant, PhaseState,
};
use crate::specfun::{gamma, integrate, integrate_panels, sech_pow_cos_transform, QuadratureSpec};

use super::{least_squares, Builder, CheckReport, HarnessConfig, Part};

fn st(x: f64, y: f64) -> PhaseState {
    PhaseState::new(x, y)
}

// ½h_yy + y h_x by fourth-order differences, steps shrinking where ln h is steep.
fn generator_residual(x: f64, y: f64) -> Result<f64> {
    let h = |x: f64, y: f64| h_eval(st(x, y));
    let w = y / x.cbrt();
    let dy = 1e-2 * x.cbrt() / (1.0 + w * w);
    let dx = 1e-2 * x / (1.0 + w * w);
    let hyy = (-h(x, y + 2.0 * dy)? + 16.0 * h(x, y + dy)? - 30.0 * h(x, y)? + 16.0 * h(x, y - dy)? - h(x, y - 2.0 * dy)?)
        / (12.0 * dy * dy);
    let hx = (-h(x + 2.0 * dx, y)? + 8.0 * h(x + dx, y)? - 8.0 * h(x - dx, y)? + h(x - 2.0 * dx, y)?) / (12.0 * dx);
    Ok(0.5 * hyy + y * hx)
}

const XS: [f64; 5] = [0.1, 0.4, 1.0, 3.0, 10.0];
const YS: [f64; 7] = [-2.0, -1.0, -0.3, 0.0, 0.3, 1.0, 2.0];

pub fn check_harmonicity(cfg: &HarnessConfig) -> Result<CheckReport> {
    let mut b = Builder::new("harmonicity", cfg, json!({ "x": XS, "y": YS, "fd_step": 1e-2 }));
    let mut worst = (0.0, 0.0, 0.0);
    for &x in &XS {
        for &y in &YS {
            let r = (generator_residual(x, y)? / h_eval(st(x, y))?).abs();
            if r >= worst.0 {
                worst = (r, x, y);
            }
        }
    }
    b.push(Part::at_most("residual_over_h.worst", worst.0, 1e-4));
    b.note(format!("worst generator residual at ({}, {})", worst.1, worst.2));
    for (x, y) in [(1.0, 1.0), (0.1, -2.0)] {
        let r = (generator_residual(x, y)? / h_eval(st(x, y))?).abs();
        b.push(Part::at_most(format!("residual_over_h.({x},{y})"), r, 1e-4));
    }
    // G scales like 1/time, so c²·(Gh/h) is invariant under (x, y) → (c³x, cy).
    let (c, x, y) = (2.0, 0.4, -0.3);
    let r0 = generator_residual(x, y)? / h_eval(st(x, y))?;
    let r1 = generator_residual(c * c * c * x, c * y)? / h_eval(st(c * c * c * x, c * y))?;
    b.push(Part::abs("residual_over_h.scaling_pair", c * c * r1, r0, 1e-6));
    let mut worst_scale: f64 = 0.0;
    for &x in &[0.05, 0.3, 1.7, 8.0, 40.0] {
        for &y in &[-3.0, -0.7, -1e-4, 0.0, 2e-4, 0.9, 4.0] {
            let lhs = h_eval(st(x, y))?;
            let rhs = x.powf(1.0 / 6.0) * h_eval(st(1.0, y / x.cbrt()))?;
            if rhs > 1e-280 {
                worst_scale = worst_scale.max(((lhs - rhs) / rhs).abs());
            }
        }
    }
    b.push(Part::at_most("scaling.worst_rel_err", worst_scale, 1e-10));
    b.push(Part::abs("h(0,4)", h_eval(st(0.0, 4.0))?, 2.0, 0.0));
    Ok(b.finish())
}

pub fn check_transition_identities(cfg: &HarnessConfig) -> Result<CheckReport> {
    let mut b = Builder::new("transition_identities", cfg, json!({ "b": [0.3, 1.0, 4.0], "t": [10.0, 1e3] }));
    let mut worst_q: f64 = 0.0;
    for &t in &[0.3, 1.0, 4.0] {
        for &(x, y) in &[(1.0, 0.0), (-0.5, 1.2), (0.2, -0.7)] {
            for &u in &[-1.0, 0.0, 0.7, 2.0] {
                for &v in &[0.1, 0.8, 2.5] {
                    let a = q_density(t, st(x, y), st(u, v))?;
                    let m = q_density(t, st(x, y), st(u, -v))?;
                    worst_q = worst_q.max((a + m).abs());
                }
            }
        }
    }
    b.push(Part::abs("q_antisymmetry.worst", worst_q, 0.0, 0.0));
    let coef_survival = 3.0 * gamma(0.25)? / (2f64.powf(0.75) * PI.powf(1.5));
    let coef_passage = 2f64.powf(0.25) * gamma(0.25)? / PI.sqrt() * (9.0 / (4.0 * PI * PI)).sqrt();
    b.push(Part::rel("n1_constant.closed_forms", coef_passage, coef_survival, 4.0 * f64::EPSILON));
    b.push(Part::rel("n1_constant.survival_constant", survival_constant(), coef_survival, 4.0 * f64::EPSILON));
    let mut worst: f64 = 0.0;
    for &bb in &[0.3, 1.0, 4.0] {
        for &t in &[10.0, 1e3] {
            let a = nth_passage_asymptotic(t, 1, bb)?;
            let s = survival_asymptotic(t, st(0.0, bb))?;
            worst = worst.max(((a - s) / s).abs());
        }
    }
    b.push(Part::at_most("n1_asymptotic.worst_rel_err", worst, 4.0 * f64::EPSILON));
    let spec = QuadratureSpec::default();
    let mut worst_d: f64 = 0.0;
    for &(bb, t, z) in &[(1.0, 1.0, 0.5), (1.0, 3.0, 1.0), (0.5, 10.0, 0.3), (2.0, 0.4, 1.7)] {
        let d = nth_passage_joint_density(1, bb, t, z, &spec)?;
        let m = first_passage_density_mckean(t, bb, z * t.sqrt())? * t.sqrt();
        worst_d = worst_d.max(((d - m) / m).abs());
    }
    b.push(Part::at_most("n1_density_vs_first_passage.worst_rel_err", worst_d, 1e-8));
    Ok(b.finish())
}

// ∫_0^∞ cos(γu)/cosh(πγ/3)^k dγ by plain quadrature.
fn sech_cos_direct(k: u32, u: f64, spec: &QuadratureSpec) -> Result<f64> {
    // the integrand is below 1e-17 of its peak past γ = 45/k
    let end = 45.0 / k as f64 + 5.0;
    let n = (2.0 * end * (1.0 + u)).ceil() as usize;
    let pts: Vec<f64> = (0..=n).map(|i| end * i as f64 / n as f64).collect();
    integrate_panels(|g| (g * u).cos() / (PI * g / 3.0).cosh().powi(k as i32), &pts, spec)
}

pub const BETA_FIT_WINDOW: (f64, f64) = (3e-4, 3e-3);
const BETA_FIT_POINTS: usize = 13;

/// Leading coefficient of −(I_k(a) − α_k a)/a^{3/2} as a polynomial of degree k−1 in
/// −ln a, fitted over a log-spaced window around 1e-3.
pub fn fit_beta(k: u32, spec: &QuadratureSpec) -> Result<f64> {
    let al = alpha_k(k, spec)?;
    let (lo, hi) = BETA_FIT_WINDOW;
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for i in 0..BETA_FIT_POINTS {
        let a = lo * (hi / lo).powf(i as f64 / (BETA_FIT_POINTS - 1) as f64);
        // I_k − α_k a = remainder − α_k a (1 − e^{−a})
        let r = i_k_remainder(k, a, spec)? + al * a * (-a).exp_m1();
        let l = -a.ln();
        rows.push((0..k).map(|j| l.powi((k - 1 - j) as i32)).collect());
        ys.push(-r / a.powf(1.5));
    }
    Ok(least_squares(&rows, &ys)[0])
}

pub fn check_appendix_identities(cfg: &HarnessConfig) -> Result<CheckReport> {
    let mut b = Builder::new(
        "appendix_identities",
        cfg,
        json!({ "lebedev_a": [0.5, 1.0, 2.0], "beta_window": [BETA_FIT_WINDOW.0, BETA_FIT_WINDOW.1], "beta_points": BETA_FIT_POINTS }),
    );
    let spec = QuadratureSpec::default().with_tol(1e-14, 1e-12);
    for &a in &[0.5, 1.0, 2.0] {
        let q = lebedev_f(a, &spec)?;
        b.push(Part::rel(format!("lebedev.printed.a={a}"), q, lebedev_f_stated(a), 1e-6).at(a));
        b.push(Part::rel(format!("lebedev.corrected.a={a}"), q, lebedev_f_closed(a), 1e-6).at(a).info());
    }
    let mut worst: f64 = 0.0;
    for k in 1..=4u32 {
        for &u in &[0.0, 0.5, 2.0] {
            let c = sech_pow_cos_transform(k, u)?;
            let d = sech_cos_direct(k, u, &spec)?;
            worst = worst.max(((c - d) / c).abs());
        }
    }
    b.push(Part::at_most("sech_transform_vs_quadrature.worst_rel_err", worst, 1e-8));
    b.push(Part::abs("sech_transform.k=1,u=0", sech_pow_cos_transform(1, 0.0)?, 1.5, 1e-15));
    b.push(Part::rel("sech_transform.k=2,u=0", sech_pow_cos_transform(2, 0.0)?, 3.0 / PI, 1e-15));
    let mut worst_i: f64 = 0.0;
    for k in 1..=4u32 {
        for &a in &[0.2, 1.0, 4.0] {
            let q = i_k_quadrature(k, a, &spec)?;
            let r = i_k_sech_route(k, a, &spec)?;
            worst_i = worst_i.max(((q - r) / r).abs());
        }
    }
    b.push(Part::at_most("i_k.sech_route_vs_bessel.worst_rel_err", worst_i, 1e-8));
    // C_0 = ∫ 1/sinh((3/2)Argcosh(1+v)) dv in v = r² on (0, 1) and v = 1/r² beyond.
    let f = |v: f64| 1.0 / (1.5 * (1.0 + v).acosh()).sinh();
    let near = integrate(|r: f64| if r == 0.0 { 2.0 / 1.5f64.sqrt() } else { 2.0 * r * f(r * r) }, 0.0, 1.0, &spec)?;
    let far = integrate(|r: f64| if r == 0.0 { 0.0 } else { 2.0 * f(1.0 / (r * r)) / (r * r * r) }, 0.0, 1.0, &spec)?;
    b.push(Part::rel("c0.display_vs_kernel", c_k_minus_1(1, &spec)?, near + far, 1e-8));
    let tight = QuadratureSpec::tight();
    for k in 1..=3u32 {
        let fit = fit_beta(k, &tight)?;
        let printed = beta_k_small_a(k);
        b.push(Part::rel(format!("beta_fit.printed.k={k}"), fit, printed, 0.10).at(k as f64));
        b.push(Part::rel(format!("beta_fit.doubled.k={k}"), fit, 2.0 * printed, 0.10).at(k as f64).info());
    }
    b.note("beta_fit: a-frame coefficient of a^{3/2}(-ln a)^{k-1}; printed β_k maps to it by a = 4/√t");
    Ok(b.finish())
}
