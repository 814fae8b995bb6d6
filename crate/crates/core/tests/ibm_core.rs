#![allow(clippy::excessive_precision)]

use std::f64::consts::{E, PI};

use ibm_toolkit::ibm_core::*;
use ibm_toolkit::specfun::{gauss_legendre, integrate, ln_gamma, QuadratureSpec};
use proptest::prelude::*;

fn st(x: f64, y: f64) -> PhaseState {
    PhaseState::new(x, y)
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

// 40-digit evaluations of the U-function branches.
const H_REF: [((f64, f64), f64); 9] = [
    ((1.0, 0.0), 0.6183916885668086143),
    ((1.0, 1.0), 1.0625661010816167708),
    ((1.0, -1.0), 0.19639537996500653445),
    ((0.1, -2.0), 2.3970793342240135283e-10),
    ((2.5, 0.7), 0.9964578155688234016),
    ((8.0, 1.0), 1.1996651963726223795),
    ((1.0, 3.0), 1.7395271280557042402),
    ((0.01, 0.2), 0.47950549852861878344),
    ((5.0, -4.0), 0.0053436511941494477043),
];

// (x, y, ∂h/∂x, ∂h/∂y), same source.
const GRAD_REF: [(f64, f64, f64, f64); 4] = [
    (1.0, 1.0, 0.040878024691075673453, 0.40864897646758136505),
    (1.0, -1.0, 0.14180607003458872473, 0.32722052012126290695),
    (0.3, 0.5, 0.14344115123817674797, 0.52443183607710788696),
    (2.0, -0.5, 0.073966176468530507688, 0.3986542410151909972),
];

#[test]
fn h_matches_reference_values() {
    for &((x, y), want) in &H_REF {
        let got = h_eval(st(x, y)).unwrap();
        assert!(rel(got, want) < 1e-12, "h({x},{y}) = {got}, want {want}");
    }
}

#[test]
fn h_boundary_and_zero_branch() {
    assert_eq!(h_eval(st(0.0, 4.0)).unwrap(), 2.0);
    assert_eq!(h_eval(st(0.0, -3.0)).unwrap(), 0.0);
    let g = |x: f64| ln_gamma(x).unwrap().exp();
    let h10 = 4.5f64.powf(1.0 / 6.0) * g(1.0 / 3.0) / g(1.0 / 6.0);
    assert!(rel(h_eval(st(1.0, 0.0)).unwrap(), h10) < 1e-14);
    assert!(h_eval(st(-1.0, 0.0)).is_err());
    // continuity as x ↓ 0
    for &y in &[0.5, 2.0] {
        assert!(rel(h_eval(st(1e-12, y)).unwrap(), y.sqrt()) < 1e-4);
    }
    assert!(h_eval(st(1e-12, -1.0)).unwrap() < 1e-100);
}

#[test]
fn h_scaling_grid() {
    for &x in &[0.05, 0.3, 1.7, 8.0, 40.0] {
        for &y in &[-3.0, -0.7, -1e-4, 0.0, 2e-4, 0.9, 4.0] {
            let lhs = h_eval(st(x, y)).unwrap();
            let rhs = x.powf(1.0 / 6.0) * h_eval(st(1.0, y / x.cbrt())).unwrap();
            if rhs > 1e-280 {
                assert!(rel(lhs, rhs) < 1e-10, "({x},{y}): {lhs} {rhs}");
            }
        }
    }
    let a = h_eval(st(8.0, 1.0)).unwrap();
    assert!(rel(a, 8f64.powf(1.0 / 6.0) * h_eval(st(1.0, 0.5)).unwrap()) < 1e-12);
}

fn generator_residual(x: f64, y: f64) -> f64 {
    let h = |x: f64, y: f64| h_eval(st(x, y)).unwrap();
    // steps shrink where ln h is steep (large negative w)
    let w = y / x.cbrt();
    let dy = 1e-2 * x.cbrt() / (1.0 + w * w);
    let dx = 1e-2 * x / (1.0 + w * w);
    let hyy = (-h(x, y + 2.0 * dy) + 16.0 * h(x, y + dy) - 30.0 * h(x, y) + 16.0 * h(x, y - dy) - h(x, y - 2.0 * dy))
        / (12.0 * dy * dy);
    let hx = (-h(x + 2.0 * dx, y) + 8.0 * h(x + dx, y) - 8.0 * h(x - dx, y) + h(x - 2.0 * dx, y)) / (12.0 * dx);
    0.5 * hyy + y * hx
}

#[test]
fn h_is_harmonic_on_grid() {
    for &x in &[0.1, 0.4, 1.0, 3.0, 10.0] {
        for &y in &[-2.0, -1.0, -0.3, 0.0, 0.3, 1.0, 2.0] {
            let h = h_eval(st(x, y)).unwrap();
            let r = generator_residual(x, y);
            assert!(r.abs() < 1e-4 * h, "({x},{y}): residual {r}, h {h}");
        }
    }
}

#[test]
fn gradient_matches_reference_and_difference_quotients() {
    for &(x, y, dx, dy) in &GRAD_REF {
        let (gx, gy) = h_grad(st(x, y)).unwrap();
        assert!(rel(gx, dx) < 1e-10, "dx at ({x},{y}): {gx} {dx}");
        assert!(rel(gy, dy) < 1e-10, "dy at ({x},{y}): {gy} {dy}");
    }
    for &(x, y) in &[(1.0, 1.0), (1.0, -1.0), (1.0, 0.0), (0.5, 5e-5)] {
        let e = 1e-5;
        let fd = (h_eval(st(x, y + e)).unwrap() - h_eval(st(x, y - e)).unwrap()) / (2.0 * e);
        assert!(rel(h_grad(st(x, y)).unwrap().1, fd) < 1e-6);
    }
    // h(x, 0) = h(1, 0) x^{1/6}
    for &x in &[0.5f64, 2.0, 7.0] {
        let want = 0.6183916885668086 / 6.0 * x.powf(-5.0 / 6.0);
        assert!(rel(h_grad(st(x, 0.0)).unwrap().0, want) < 1e-6);
    }
    assert!(h_grad(st(0.0, 1.0)).is_err());
}

#[test]
fn drift_properties() {
    let (_, dy) = h_grad(st(1.0, 1.0)).unwrap();
    let d = conditioned_drift(st(1.0, 1.0)).unwrap();
    assert!(rel(d, dy / h_eval(st(1.0, 1.0)).unwrap()) < 1e-14);
    let far = conditioned_drift(st(1.0, 50.0)).unwrap();
    assert!(rel(far, 1.0 / 100.0) < 0.1);
    let e = 1e-5;
    let fd = (h_eval(st(1.0, e)).unwrap().ln() - h_eval(st(1.0, -e)).unwrap().ln()) / (2.0 * e);
    assert!(rel(conditioned_drift(st(1.0, 0.0)).unwrap(), fd) < 1e-6);
    // the band edges
    for &y in &[0.999e-3, 1.001e-3, -0.999e-3, -1.001e-3] {
        let fd = (h_eval(st(1.0, y + e)).unwrap().ln() - h_eval(st(1.0, y - e)).unwrap().ln()) / (2.0 * e);
        assert!((conditioned_drift(st(1.0, y)).unwrap() - fd).abs() < 1e-5);
    }
}

#[test]
fn fast_table_agrees_with_direct_evaluation() {
    let t = HFast::global();
    for i in 0..4001 {
        let w = -8.0 + 16.0 * (i as f64 + 0.123) / 4001.0;
        for &x in &[0.02, 1.0, 30.0] {
            let s = st(x, w * x.cbrt());
            let a = h_eval(s).unwrap();
            if a > 1e-250 {
                assert!(rel(t.h(s).unwrap(), a) < 1e-10, "h at {s:?}");
            }
            let d = conditioned_drift(s).unwrap();
            assert!((t.drift(s).unwrap() - d).abs() < 1e-7 * d.abs().max(1.0 / x.cbrt()), "drift at {s:?}");
        }
    }
    assert_eq!(t.h(st(0.0, 9.0)).unwrap(), 3.0);
    assert_eq!(t.h_reflected(st(-1.0, 0.0)).unwrap(), t.h(st(1.0, 0.0)).unwrap());
}

#[test]
fn h_bound_with_fitted_constants() {
    // Fit a = b on a coarse grid, then check a finer one.
    let mut c: f64 = 0.0;
    for i in 0..30 {
        for j in 0..30 {
            let x = 0.01 * 1.4f64.powi(i);
            let y = -6.0 + 12.0 * j as f64 / 29.0;
            c = c.max(h_eval(st(x, y)).unwrap() / (x.powf(1.0 / 6.0) + y.abs().sqrt()));
        }
    }
    assert!(c.is_finite() && c < 2.0);
    let bound = 1.05 * c;
    for i in 0..57 {
        for j in 0..57 {
            let x = 0.01 * 1.2f64.powi(i);
            let y = -6.0 + 12.0 * j as f64 / 56.0;
            let h = h_eval(st(x, y)).unwrap();
            assert!(h <= bound * (x.powf(1.0 / 6.0) + y.abs().sqrt()), "({x},{y})");
        }
    }
}

#[test]
fn h_monotone_in_both_arguments() {
    let xs: Vec<f64> = (0..25).map(|i| 0.05 * 1.3f64.powi(i)).collect();
    let ys: Vec<f64> = (0..41).map(|j| -4.0 + 0.2 * j as f64).collect();
    for &y in &ys {
        let mut prev = 0.0;
        for &x in &xs {
            let h = h_eval(st(x, y)).unwrap();
            assert!(h >= prev, "x-monotone at ({x},{y})");
            prev = h;
        }
    }
    for &x in &xs {
        let mut prev = 0.0;
        for &y in &ys {
            let h = h_eval(st(x, y)).unwrap();
            assert!(h >= prev, "y-monotone at ({x},{y})");
            prev = h;
        }
    }
}

#[test]
fn transition_density_examples() {
    let p = transition_density(1.0, st(0.0, 0.0), st(0.0, 0.0)).unwrap();
    assert!(rel(p, 3f64.sqrt() / PI) < 1e-15);
    assert!(transition_density(0.0, st(0.0, 0.0), st(0.0, 0.0)).is_err());
    let spec = QuadratureSpec::default();
    let total = integrate(
        |u| integrate(|v| transition_density(1.0, st(0.0, 0.0), st(u, v)).unwrap(), -8.0, 8.0, &spec).unwrap(),
        -5.0,
        5.0,
        &spec,
    )
    .unwrap();
    assert!((total - 1.0).abs() < 1e-6);
}

#[test]
fn chapman_kolmogorov_at_one_triple() {
    let (a, b) = (st(0.3, -0.2), st(1.1, 0.4));
    let (s, t) = (0.6, 1.5);
    let spec = QuadratureSpec::default().with_tol(1e-12, 1e-9);
    let lhs = integrate(
        |u| {
            integrate(
                |v| {
                    let m = st(u, v);
                    transition_density(s, a, m).unwrap() * transition_density(t - s, m, b).unwrap()
                },
                -7.0,
                7.0,
                &spec,
            )
            .unwrap()
        },
        -4.0,
        5.0,
        &spec,
    )
    .unwrap();
    let rhs = transition_density(t, a, b).unwrap();
    assert!(rel(lhs, rhs) < 1e-5, "{lhs} {rhs}");
}

#[test]
fn q_density_antisymmetry() {
    assert_eq!(q_density(1.0, st(0.2, 0.1), st(0.5, 0.0)).unwrap(), 0.0);
    let a = q_density(1.0, st(0.0, 1.0), st(0.5, 0.2)).unwrap();
    let b = q_density(1.0, st(0.0, 1.0), st(0.5, -0.2)).unwrap();
    assert_eq!(a, -b);
    let p = transition_density(1.0, st(0.0, 1.0), st(0.5, 0.2)).unwrap()
        - transition_density(1.0, st(0.0, 1.0), st(0.5, -0.2)).unwrap();
    assert_eq!(a, p);
}

#[test]
fn survival_constant_and_asymptotic() {
    let c = survival_constant();
    assert!(rel(c, 1.1614620497) < 1e-9);
    let v = survival_asymptotic(1e4, st(1.0, 0.0)).unwrap();
    assert!(rel(v, 0.0718238478) < 1e-8);
    let a = survival_asymptotic(50.0, st(8.0, 2.0)).unwrap();
    let b = survival_asymptotic(50.0, st(1.0, 1.0)).unwrap();
    assert!(rel(a, 8f64.powf(1.0 / 6.0) * b) < 1e-12);
    assert!(survival_asymptotic(1.0, st(0.0, -1.0)).is_err());
    assert!(survival_asymptotic(1.0, st(0.0, 0.0)).is_err());
}

#[test]
fn nth_passage_asymptotic_examples() {
    for &b in &[0.3, 1.0, 4.0] {
        for &t in &[10.0, 1e3] {
            let a = nth_passage_asymptotic(t, 1, b).unwrap();
            let s = survival_asymptotic(t, st(0.0, b)).unwrap();
            assert!(rel(a, s) < 1e-14);
        }
    }
    let c2 = AsymptoticCoeffs::nth_passage(2, 1.0).unwrap();
    assert_eq!(c2.log_power, 1);
    assert!(rel(nth_passage_asymptotic(E, 2, 1.0).unwrap(), c2.leading_constant * E.powf(-0.25)) < 1e-14);
    let t = 200.0;
    let r = nth_passage_asymptotic(t, 3, -1.0).unwrap() / nth_passage_asymptotic(t, 2, -1.0).unwrap();
    assert!(rel(r, (9.0 / (4.0 * PI * PI)).sqrt() * t.ln() / 2.0) < 1e-13);
    assert!(nth_passage_asymptotic(10.0, 2, 0.0).is_err());
}

#[test]
fn first_passage_kernel_reproduces_mckean() {
    let spec = QuadratureSpec::default();
    for &(b, t, z) in &[(1.0, 1.0, 0.5), (1.0, 3.0, 1.0), (0.5, 10.0, 0.3), (2.0, 0.4, 1.7)] {
        let d = nth_passage_joint_density(1, b, t, z, &spec).unwrap();
        let m = first_passage_density_mckean(t, b, z * t.sqrt()).unwrap() * t.sqrt();
        assert!(rel(d, m) < 1e-10, "({b},{t},{z}) {d} {m}");
    }
}

#[test]
fn kernel_routes_agree() {
    let spec = QuadratureSpec::default().with_tol(1e-14, 1e-11);
    for n in 2..5 {
        for &a in &[0.3, 1.0, 3.0] {
            let x = nth_passage_kernel(n, a, &spec).unwrap();
            let y = nth_passage_kernel_direct(n, a, &spec).unwrap();
            assert!(rel(x, y) < 1e-9, "n={n} a={a}: {x} {y}");
        }
    }
    // J_2 = I_0 − I_2/4 and J_3 = I_1/2 − I_3/8
    let a = 0.8;
    let j2 = lebedev_f_closed(a) - 0.25 * i_k_sech_route(2, a, &spec).unwrap();
    assert!(rel(nth_passage_kernel(2, a, &spec).unwrap(), j2) < 1e-14);
    let j3 = 0.5 * i_k_sech_route(1, a, &spec).unwrap() - 0.125 * i_k_sech_route(3, a, &spec).unwrap();
    assert!(rel(nth_passage_kernel(3, a, &spec).unwrap(), j3) < 1e-14);
}

// ∫∫ f(t, z) dt dz with t = e^s, fixed Gauss–Legendre in both directions.
fn mass(f: impl Fn(f64, f64) -> f64, s_lo: f64, s_hi: f64, z_hi: f64) -> f64 {
    let (sn, sw) = gauss_legendre(40);
    let (zn, zw) = gauss_legendre(24);
    let mut total = 0.0;
    let panels = 6;
    for p in 0..panels {
        let (a, b) = (
            s_lo + (s_hi - s_lo) * p as f64 / panels as f64,
            s_lo + (s_hi - s_lo) * (p + 1) as f64 / panels as f64,
        );
        for (xi, wi) in sn.iter().zip(&sw) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * xi;
            let t = s.exp();
            for zp in 0..3 {
                let (c, d) = (z_hi * zp as f64 / 3.0, z_hi * (zp + 1) as f64 / 3.0);
                for (yj, vj) in zn.iter().zip(&zw) {
                    let z = 0.5 * (c + d) + 0.5 * (d - c) * yj;
                    total += wi * 0.5 * (b - a) * vj * 0.5 * (d - c) * t * f(t, z);
                }
            }
        }
    }
    total
}

#[test]
fn first_passage_density_normalises() {
    let spec = QuadratureSpec::default();
    let m = mass(|t, z| nth_passage_joint_density(1, 1.0, t, z, &spec).unwrap(), -7.0, 60.0, 7.0);
    assert!((m - 1.0).abs() < 0.01, "{m}");
}

#[test]
fn conditioned_hitting_quantities() {
    let s = st(1.0, 0.0);
    let q = q_hit_probability(s, 0.5).unwrap();
    assert!(rel(q, 1.0 - 0.5f64.powf(1.0 / 6.0)) < 1e-12);
    assert_eq!(q_hit_probability(s, 0.0).unwrap(), 0.0);
    assert!(q_hit_probability(s, 1.0).is_err());
    let near = q_hit_probability(st(1.0, 0.7), 1.0 - 1e-12).unwrap();
    assert!(near < 1.0 && rel(near, 1.0 - 0.7f64.sqrt() / h_eval(st(1.0, 0.7)).unwrap()) < 1e-4);
    let l = lemma_hbta_rhs(s, 0.5).unwrap();
    assert!(rel(l, 0.6183916885668086 * (1.0 - 0.5f64.powf(1.0 / 6.0))) < 1e-12);
    assert_eq!(lemma_hbta_rhs(s, 0.0).unwrap(), 0.0);
    assert!(lemma_hbta_rhs(s, 0.9).unwrap() > l);
}

#[test]
fn selfstart_density_mass_is_hit_probability() {
    let (a, y) = (0.7, 0.8);
    assert_eq!(qa_selfstart_density(a, y, 1.0, 0.0).unwrap(), 0.0);
    assert!(qa_selfstart_density(a, 1e-12, 1.0, -0.5).unwrap() < 1e-5);
    // t = e^s, and z ∈ (−7, 0) mapped onto (0, 7).
    let m = mass(|t, w| qa_selfstart_density(a, y, t, -w).unwrap(), -7.0, 60.0, 7.0);
    let want = 1.0 - y.sqrt() / h_eval(st(a, y)).unwrap();
    assert!(rel(m, want) < 1e-3, "{m} {want}");
}

fn tent() -> PenaltyWeight {
    PenaltyWeight::triangular(0.0, 1.0, 2.0, 1.0).unwrap()
}

#[test]
fn lastpassage_martingale_structure() {
    let spec = QuadratureSpec::default();
    let phi = PenaltyWeight::new(vec![(0.0, 1.0), (0.5, 0.6), (1.5, 0.0)], 1.5).unwrap();
    let s = st(1.0, 0.0);
    let cap = phi_cap_lastpassage(s, &phi, &spec).unwrap();
    let m0 = martingale_lastpassage(0.0, LastZero::Never, s, &phi, &spec).unwrap();
    assert_eq!(cap, m0);
    // x > 0: only h(x, y) enters the head term
    let tail = azema_remainder(0.0, s, &phi, &spec).unwrap();
    assert!(rel(cap - tail, h_eval(s).unwrap()) < 1e-10);
    // mirrored start gives the same Φ
    let mirrored = phi_cap_lastpassage(s.mirrored(), &phi, &spec).unwrap();
    assert!(rel(mirrored, cap) < 1e-10);
    // t beyond the support: head term only, Azéma ratio 0
    let late = martingale_lastpassage(2.0, LastZero::At(1.0), st(0.4, -0.3), &phi, &spec).unwrap();
    assert!(rel(late, 0.3 * h_eval(st(0.4, -0.3)).unwrap()) < 1e-10);
    assert_eq!(azema_ratio(2.0, LastZero::At(1.0), st(0.4, -0.3), &phi, &spec).unwrap(), 0.0);
    // φ(g) = 0 (tent vanishes at 0, no zero yet): ratio 1
    let r = azema_ratio(0.5, LastZero::Never, st(-0.3, 0.1), &tent(), &spec).unwrap();
    assert_eq!(r, 1.0);
    assert!(martingale_lastpassage(1.0, LastZero::At(1.5), s, &phi, &spec).is_err());
}

#[test]
fn lastpassage_rate_closed_form_matches_quadrature() {
    let spec = QuadratureSpec::default().with_tol(1e-14, 1e-11);
    for &(s, x, y) in &[(0.5, 1.0, 0.0), (1.3, -0.4, 0.9), (2.0, 0.2, -1.0)] {
        let from = st(x, y);
        let q = integrate(
            |z| z.abs().powf(1.5) * transition_density(s, from, st(0.0, z)).unwrap(),
            -15.0,
            15.0,
            &spec,
        )
        .unwrap();
        assert!(rel(last_zero_rate(s, from).unwrap(), q) < 1e-10);
    }
}

#[test]
fn triplet_density_vanishes_on_the_wrong_side() {
    // A killed process started at (0, z) keeps the sign of z.
    let killed = |_r: f64, from: PhaseState, to: PhaseState| {
        if from.y * to.x > 0.0 {
            (-(to.x * to.x + to.y * to.y)).exp()
        } else {
            0.0
        }
    };
    let spec = QuadratureSpec::default();
    let pos = triplet_density_g0(2.0, st(1.0, 0.0), 1.0, st(0.5, 0.2), &killed, &spec).unwrap();
    let neg = triplet_density_g0(2.0, st(1.0, 0.0), 1.0, st(-0.5, 0.2), &killed, &spec).unwrap();
    assert!(pos > 0.0 && neg > 0.0);
    let sym = triplet_density_g0(2.0, st(-1.0, 0.0), 1.0, st(-0.5, -0.2), &killed, &spec).unwrap();
    assert!(rel(sym, pos) < 1e-12);
    let none = triplet_density_g0(2.0, st(1.0, 0.0), 1.0, st(0.5, 0.2), &|_, _, _| 0.0, &spec).unwrap();
    assert_eq!(none, 0.0);
}

#[test]
fn supremum_cap_two_routes() {
    let spec = QuadratureSpec::default();
    let plateau = PenaltyWeight::new(vec![(0.0, 1.0), (1.5, 1.0), (2.5, 0.0)], 2.5).unwrap();
    for phi in [tent(), plateau] {
        for &(x, y) in &[(0.0, 1.0), (0.5, -1.0), (0.3, 0.0), (-1.0, 2.0), (1.2, -0.4)] {
            let s = st(x, y);
            let a = phi_cap_supremum(s, &phi, &spec).unwrap();
            let b = phi_cap_supremum_direct(s, &phi, &spec).unwrap();
            assert!(rel(a, b) < 1e-6, "({x},{y}) {a} {b}");
            assert_eq!(martingale_supremum(x, s, &phi, &spec).unwrap(), a);
        }
    }
    let phi = tent();
    assert_eq!(martingale_supremum(2.5, st(1.0, 0.3), &phi, &spec).unwrap(), 0.0);
    assert!(martingale_supremum(0.5, st(1.0, 0.3), &phi, &spec).is_err());
}

#[test]
fn supremum_law_edges() {
    let spec = QuadratureSpec::default();
    let phi = tent();
    let s = st(0.0, 1.0);
    assert_eq!(s_infinity_law(s, &phi, 2.0, &spec).unwrap(), 0.0);
    assert!((s_infinity_law(s, &phi, 1e-9, &spec).unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(s_infinity_atom(s, &phi, &spec).unwrap(), 0.0);
    // with an atom the law has total mass one
    let s = st(0.5, -1.0);
    let atom = s_infinity_atom(s, &phi, &spec).unwrap();
    let rest = s_infinity_law(s, &phi, 0.5 + 1e-12, &spec).unwrap();
    assert!(atom > 0.0 && ((atom + rest) - 1.0).abs() < 1e-6);
    // tail is decreasing in c
    let mut prev = 1.0;
    for i in 1..20 {
        let c = 0.5 + 0.075 * i as f64;
        let v = s_infinity_law(s, &phi, c, &spec).unwrap();
        assert!(v <= prev + 1e-14);
        prev = v;
    }
}

#[test]
fn lebedev_integral_closed_form() {
    let spec = QuadratureSpec::default().with_tol(1e-14, 1e-12);
    for &a in &[0.5, 1.0, 2.0] {
        let q = lebedev_f(a, &spec).unwrap();
        assert!(rel(q, lebedev_f_closed(a)) < 1e-9);
        assert!(rel(q / lebedev_f_stated(a), 0.75) < 1e-9);
    }
}

#[test]
fn sech_route_matches_bessel_quadrature() {
    let spec = QuadratureSpec::default().with_tol(1e-14, 1e-12);
    for k in 1..5 {
        for &a in &[0.2, 1.0, 4.0] {
            let q = i_k_quadrature(k, a, &spec).unwrap();
            let r = i_k_sech_route(k, a, &spec).unwrap();
            assert!(rel(q, r) < 1e-10, "k={k} a={a}: {q} {r}");
            let rem = i_k_remainder(k, a, &spec).unwrap();
            let lin = a * (-a).exp() * alpha_k(k, &spec).unwrap();
            assert!(rel(lin + rem, r) < 1e-10);
        }
    }
}

#[test]
fn alpha_constants() {
    let spec = QuadratureSpec::default().with_tol(1e-14, 1e-12);
    // C_0 = ∫ 1/sinh((3/2)Argcosh(1+v)) dv, integrated directly in v = r² on (0, 1) and v = 1/r² beyond.
    let f = |v: f64| 1.0 / (1.5 * (1.0 + v).acosh()).sinh();
    let near = integrate(|r: f64| if r == 0.0 { 2.0 / 1.5f64.sqrt() } else { 2.0 * r * f(r * r) }, 0.0, 1.0, &spec).unwrap();
    let far = integrate(|r: f64| if r == 0.0 { 0.0 } else { 2.0 * f(1.0 / (r * r)) / (r * r * r) }, 0.0, 1.0, &spec).unwrap();
    let c0 = near + far;
    assert!(rel(c_k_minus_1(1, &spec).unwrap(), c0) < 1e-8);
    // integrability of the display forces α_{n−2}/2^{n−2} = α_n/2^n
    let a0 = alpha_k(0, &spec).unwrap();
    for k in 1..6 {
        assert!(rel(alpha_k(k, &spec).unwrap(), 2f64.powi(k as i32) * a0) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_scaling(x in 0.05f64..20.0, w in -3.0f64..3.0, c in 0.3f64..3.0) {
        let y = w * x.cbrt();
        let lhs = h_eval(st(c * c * c * x, c * y)).unwrap();
        let rhs = c.sqrt() * h_eval(st(x, y)).unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-10);
    }

    #[test]
    fn prop_q_antisymmetric(t in 0.1f64..5.0, x in -2.0f64..2.0, y in -2.0f64..2.0, u in -2.0f64..2.0, v in -2.0f64..2.0) {
        let a = q_density(t, st(x, y), st(u, v)).unwrap();
        let b = q_density(t, st(x, y), st(u, -v)).unwrap();
        prop_assert_eq!(a, -b);
    }

    #[test]
    fn prop_hit_probability_in_unit_interval(x in 0.05f64..10.0, y in -3.0f64..3.0, f in 0.0f64..0.999) {
        let q = q_hit_probability(st(x, y), f * x).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
    }
}
