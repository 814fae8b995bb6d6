//! Monte Carlo checks. Each gate is 3σ with path counts fixed in advance; seeds are never
//! re-rolled to make a gate pass.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{domain, Result};
use crate::ibm_core::{
    azema_remainder, lemma_hbta_rhs, martingale_lastpassage, martingale_supremum, nth_passage_joint_density,
    phi_cap_lastpassage, phi_cap_supremum, phi_cap_supremum_direct, q_hit_probability, s_infinity_atom, s_infinity_law,
    s_infinity_tail_mass, survival_asymptotic, triplet_density_g0, HFast, LastZero, PenaltyWeight,
    PhaseState,
};
use crate::mc_engine::{
    estimate_with, passage_times, simulate_conditioned_tracked, simulate_tracked, EstimateCI, Histogram2dSpec, StopRule,
    Tracking,
};
use crate::specfun::{gauss_legendre, QuadratureSpec};

use super::{cell_family, least_squares, Builder, CheckReport, HarnessConfig, Part};

fn st(x: f64, y: f64) -> PhaseState {
    PhaseState::new(x, y)
}

fn killed_at(level: f64, count: usize) -> Tracking {
    Tracking {
        levels: vec![level],
        stop: Some(StopRule { level, count }),
        ..Tracking::default()
    }
}

fn scaled(e: EstimateCI, c: f64) -> EstimateCI {
    EstimateCI { mean: e.mean * c, stderr: e.stderr * c.abs(), n: e.n }
}

// a/b for independent estimates, by the delta method.
fn ratio_indep(a: EstimateCI, b: EstimateCI) -> EstimateCI {
    let r = a.mean / b.mean;
    let se = r.abs() * ((a.stderr / a.mean).powi(2) + (b.stderr / b.mean).powi(2)).sqrt();
    EstimateCI { mean: r, stderr: se, n: a.n.min(b.n) }
}

// Index of the bin of `x` among ascending `edges`.
fn bin(edges: &[f64], x: f64) -> Option<usize> {
    if !(x >= edges[0] && x < edges[edges.len() - 1]) {
        return None;
    }
    Some(edges.windows(2).position(|w| x < w[1]).unwrap_or(edges.len() - 2))
}

// Two-sample z for a cell, `a` a mean of indicators. Its variance is taken at least as large
// as under p = b.mean, so an empty cell against a small positive one is not a certain failure.
fn cell_z(a: EstimateCI, b: EstimateCI) -> f64 {
    let gap = (a.mean - b.mean).abs();
    if gap == 0.0 {
        return 0.0;
    }
    let p = b.mean.clamp(0.0, 1.0);
    let va = (a.stderr * a.stderr).max(p * (1.0 - p) / a.n as f64);
    gap / (va + b.stderr * b.stderr).sqrt()
}

fn cell_part(name: String, a: EstimateCI, b: EstimateCI) -> Part {
    let z = cell_z(a, b);
    let mut p = Part::at_most(name, z, 3.0).info();
    p.rule = format!("cell z <= 3 (observed {:.6e}, expected {:.6e})", a.mean, b.mean);
    p
}

// Weighted least-squares slope of y on x with its standard error.
fn wls_slope(x: &[f64], y: &[EstimateCI]) -> (f64, f64) {
    let w: Vec<f64> = y.iter().map(|e| 1.0 / (e.stderr * e.stderr).max(1e-300)).collect();
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a.mean * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((a, e), b)| b * (a - xm) * (e.mean - ym)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

pub fn check_h_martingale(cfg: &HarnessConfig, t_list: &[f64]) -> Result<CheckReport> {
    let n = cfg.paths(1_000_000);
    let start = st(1.0, 0.0);
    let mut b = Builder::new("h_martingale", cfg, json!({ "start": [1.0, 0.0], "t": t_list, "n_paths": n, "stream": 100 }));
    if t_list.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return domain("h_martingale needs finite t >= 0");
    }
    let table = HFast::global();
    let h0 = table.h(start)?;
    let mut obs: Vec<f64> = t_list.iter().copied().filter(|&t| t > 0.0).collect();
    obs.sort_by(f64::total_cmp);
    obs.dedup();
    if t_list.contains(&0.0) {
        b.push(Part::abs("mean.t=0", h0, h0, 0.0).at(0.0));
    }
    if let Some(&horizon) = obs.last() {
        let tr = Tracking { observe: obs.clone(), ..killed_at(0.0, 1) };
        let est = estimate_with(obs.len(), n, cfg.rng(100), |r, out| {
            let p = simulate_tracked(start, horizon, horizon, &tr, r)?;
            for (i, &t) in obs.iter().enumerate() {
                if let Some(s) = p.at(t) {
                    out[i] = table.h(st(s.x, s.y))?;
                }
            }
            Ok(())
        })?;
        for (t, e) in obs.iter().zip(est) {
            b.push(Part::sigma(format!("mean.t={t}"), e, h0, 3.0, 0.0).at(*t));
        }
    }
    Ok(b.finish())
}

pub fn check_survival_asymptotic(cfg: &HarnessConfig, t_grid: &[f64]) -> Result<CheckReport> {
    let n = cfg.paths(1_000_000);
    let n_scale = cfg.paths(200_000);
    let mut grid = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() || grid[0] <= 0.0 {
        return domain("survival check needs positive times");
    }
    let mut b = Builder::new(
        "survival_asymptotic",
        cfg,
        json!({ "start": [1.0, 0.0], "t": grid, "n_paths": n, "n_scaling": n_scale, "streams": [200, 201, 202] }),
    );
    let start = st(1.0, 0.0);
    let horizon = grid[grid.len() - 1];
    let tr = Tracking { observe: grid.clone(), ..killed_at(0.0, 1) };
    let est = estimate_with(grid.len(), n, cfg.rng(200), |r, out| {
        let p = simulate_tracked(start, horizon, horizon, &tr, r)?;
        for (i, &t) in grid.iter().enumerate() {
            out[i] = f64::from(u8::from(p.at(t).is_some()));
        }
        Ok(())
    })?;
    let mut ratios = Vec::new();
    for (&t, e) in grid.iter().zip(&est) {
        let r = scaled(*e, 1.0 / survival_asymptotic(t, start)?);
        ratios.push(r);
        let p = Part::range(format!("ratio.t={t}"), r.mean, 0.8, 1.2).at(t);
        b.push(if t == 100.0 { p } else { p.info() });
    }
    for i in 1..grid.len() {
        let (a, c) = (ratios[i - 1], ratios[i]);
        let slack = 3.0 * a.stderr.hypot(c.stderr);
        let mut p = Part::at_most(
            format!("trend.|r-1|.t={}", grid[i]),
            (c.mean - 1.0).abs(),
            (a.mean - 1.0).abs() + slack,
        )
        .at(grid[i]);
        p.stderr = Some(c.stderr);
        b.push(p);
    }
    // (x, y, t) → (8x, 2y, 4t) leaves the law of T_0 / t invariant.
    let one = |s: PhaseState, t: f64, stream: u64| -> Result<EstimateCI> {
        let tr = killed_at(0.0, 1);
        Ok(estimate_with(1, n_scale, cfg.rng(stream), |r, out| {
            out[0] = f64::from(u8::from(!simulate_tracked(s, t, t, &tr, r)?.stopped));
            Ok(())
        })?[0])
    };
    let big = one(st(8.0, 0.0), 400.0, 201)?;
    let small = one(start, 100.0, 202)?;
    b.push(Part::two_sample("scaling.P(8,0)(T>400)_vs_P(1,0)(T>100)", big, small, 3.0));
    b.push(Part::rel(
        "scaling.asymptotic",
        survival_asymptotic(400.0, st(8.0, 0.0))?,
        survival_asymptotic(100.0, start)?,
        1e-12,
    ));
    Ok(b.finish())
}

pub const LEMMA_HBTA_STATED: f64 = 0.06747;

pub fn check_lemma_hbta(cfg: &HarnessConfig) -> Result<CheckReport> {
    let n = cfg.paths(400_000);
    let (start, a, horizon) = (st(1.0, 0.0), 0.5, 20.0);
    let mut b = Builder::new(
        "lemma_hbta",
        cfg,
        json!({ "start": [1.0, 0.0], "a": a, "horizon": horizon, "n_paths": n, "stream": 300 }),
    );
    let table = HFast::global();
    let tr = killed_at(a, 1);
    // h(a, B_{T_a}) on {T_a <= H}; otherwise the martingale h(X, B) − h(X − a, B) at H.
    let est = estimate_with(1, n, cfg.rng(300), |r, out| {
        let p = simulate_tracked(start, horizon, horizon, &tr, r)?;
        out[0] = if p.stopped {
            table.h(st(a, p.end.y))?
        } else {
            table.h(st(p.end.x, p.end.y))? - table.h(st(p.end.x - a, p.end.y))?
        };
        Ok(())
    })?[0];
    let rhs = lemma_hbta_rhs(start, a)?;
    b.push(Part::sigma("mc_vs_h(x,y)-h(x-a,y)", est, rhs, 3.0, 0.0));
    b.push(Part::sigma("mc_vs_printed", est, LEMMA_HBTA_STATED, 3.0, 0.0).info());
    b.push(Part::abs("rhs_vs_printed", rhs, LEMMA_HBTA_STATED, 5e-6));
    b.push(Part::abs("rhs.a=0", lemma_hbta_rhs(start, 0.0)?, 0.0, 0.0));
    b.push(Part::flag("rhs.a=0.9_exceeds_a=0.5", lemma_hbta_rhs(start, 0.9)? > rhs, "monotone in a"));
    Ok(b.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSuite {
    pub hit: bool,
    pub histogram: bool,
}

impl Default for QSuite {
    fn default() -> Self {
        QSuite { hit: true, histogram: true }
    }
}

pub const Q_HIT_STATED: f64 = 0.1091;
const Q_BASE: f64 = 0.01;

pub fn check_q_conditioned(cfg: &HarnessConfig, suite: QSuite) -> Result<CheckReport> {
    let n_hit = cfg.paths(10_000);
    let n_cond = cfg.paths(100_000);
    let n_free = cfg.paths(200_000);
    let bins = Histogram2dSpec { u_lo: 0.0, u_hi: 3.0, nu: 10, v_lo: -2.5, v_hi: 2.5, nv: 10 };
    let mut b = Builder::new(
        "q_conditioned",
        cfg,
        json!({
            "suite": suite, "start": [1.0, 0.0], "level": 0.5, "horizon": 1e3, "base_step": Q_BASE,
            "n_hit": n_hit, "n_conditioned": n_cond, "n_free": n_free, "bins": bins, "streams": [400, 401, 402],
        }),
    );
    let start = st(1.0, 0.0);
    if suite.hit {
        let tr = Tracking { levels: vec![0.0, 0.5], ..Tracking::default() };
        let est = estimate_with(4, n_hit, cfg.rng(400), |r, out| {
            let (p, stats) = simulate_conditioned_tracked(start, 1e3, Q_BASE, &tr, r)?;
            if p.first_crossing(0.5).is_some() {
                out[0] = 1.0;
            } else {
                out[1] = q_hit_probability(st(p.end.x, p.end.y), 0.5)?;
            }
            out[2] = p.crossings.iter().filter(|c| c.level == 0.0).count() as f64;
            out[3] = stats.rejections as f64;
            Ok(())
        })?;
        let expected = q_hit_probability(start, 0.5)?;
        let bias = est[1].mean;
        b.push(Part::sigma("hit_fraction", est[0], expected, 3.0, bias));
        b.push(Part::at_most("undecided_bias", bias, 0.01 * expected));
        b.push(Part::abs("zero_touches", est[2].mean * est[2].n as f64, 0.0, 0.0));
        b.push(Part::abs("expected_vs_printed", expected, Q_HIT_STATED, 5e-5));
        b.push(Part::report("rejections_per_path", est[3].mean));
    }
    if suite.histogram {
        let ncell = bins.len();
        let h0 = HFast::global().h(start)?;
        let cond = estimate_with(ncell, n_cond, cfg.rng(401), |r, out| {
            let tr = Tracking::default();
            let (p, _) = simulate_conditioned_tracked(start, 1.0, Q_BASE, &tr, r)?;
            if let Some(k) = bins.cell(p.end.x, p.end.y) {
                out[k] = 1.0;
            }
            Ok(())
        })?;
        let tr = killed_at(0.0, 1);
        let free = estimate_with(ncell, n_free, cfg.rng(402), |r, out| {
            let p = simulate_tracked(start, 1.0, 1.0, &tr, r)?;
            if !p.stopped {
                if let Some(k) = bins.cell(p.end.x, p.end.y) {
                    out[k] = HFast::global().h(st(p.end.x, p.end.y))? / h0;
                }
            }
            Ok(())
        })?;
        let z: Vec<f64> = cond.iter().zip(&free).map(|(a, c)| cell_z(*a, *c)).collect();
        for (k, (a, c)) in cond.iter().zip(&free).enumerate() {
            b.push(cell_part(format!("histogram.cell{k}"), *a, *c));
        }
        for p in cell_family("histogram", &z) {
            b.push(p);
        }
        let mass: f64 = cond.iter().map(|e| e.mean).sum();
        b.push(Part::range("histogram.conditioned_mass_on_grid", mass, 0.0, 1.0).info());
    }
    Ok(b.finish())
}

/// Piecewise-linear weight with φ(0) = 1 supported on [0, 2].
pub fn lastpassage_weight() -> PenaltyWeight {
    PenaltyWeight::new(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.0)], 2.0).unwrap()
}

const TRIPLET_T: f64 = 2.0;
const S_EDGES: [f64; 3] = [0.0, 1.0, 2.0];
const U_EDGES: [f64; 5] = [-3.0, -0.5, 0.0, 0.5, 3.0];
const V_EDGES: [f64; 3] = [-3.0, 0.0, 3.0];
const UV_CELLS: usize = (U_EDGES.len() - 1) * (V_EDGES.len() - 1);
const BATCHES: usize = 16;

fn uv_cell(x: f64, y: f64) -> Option<usize> {
    Some(bin(&U_EDGES, x)? * (V_EDGES.len() - 1) + bin(&V_EDGES, y)?)
}

// Cell probabilities of the last-zero triplet integral on coarse (s, u, v) cells, with inner killed
// transition probabilities from (0, z) estimated by Monte Carlo in independent batches.
fn triplet_cells_from_density(cfg: &HarnessConfig, start: PhaseState, per_node: u64, stream: u64) -> Result<Vec<EstimateCI>> {
    let spec = QuadratureSpec::default();
    let (gx, gw) = gauss_legendre(6);
    let mut s_nodes = Vec::new();
    for w in S_EDGES.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        let si = s_nodes.len() / gx.len();
        for (x, wt) in gx.iter().zip(&gw) {
            s_nodes.push((si, c + h * x, h * wt));
        }
    }
    let key = |r: f64, z: f64| (r.to_bits(), z.to_bits());
    let nodes = std::cell::RefCell::new(Vec::new());
    for &(_, s, _) in &s_nodes {
        let rec = |r: f64, from: PhaseState, _to: PhaseState| {
            nodes.borrow_mut().push((r, from.y));
            0.0
        };
        triplet_density_g0(TRIPLET_T, start, s, st(0.0, 0.0), &rec, &spec)?;
    }
    let mut nodes = nodes.into_inner();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    nodes.dedup();
    let tr = killed_at(0.0, 1);
    let per_batch = (per_node / BATCHES as u64).max(1);
    let sims: Vec<Result<Vec<f64>>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, &(r, z))| {
            let mut rng = cfg.rng(stream).shard(i as u64).rng();
            let mut acc = vec![0.0; BATCHES * UV_CELLS];
            for k in 0..BATCHES {
                for _ in 0..per_batch {
                    let p = simulate_tracked(st(0.0, z), r, r, &tr, &mut rng)?;
                    if !p.stopped {
                        if let Some(c) = uv_cell(p.end.x, p.end.y) {
                            acc[k * UV_CELLS + c] += 1.0 / per_batch as f64;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut cache: HashMap<(u64, u64), Vec<f64>> = HashMap::new();
    for (&(r, z), v) in nodes.iter().zip(sims) {
        cache.insert(key(r, z), v?);
    }
    let ns = S_EDGES.len() - 1;
    let mut out = Vec::with_capacity(ns * UV_CELLS);
    for si in 0..ns {
        for c in 0..UV_CELLS {
            let mut per = [0.0; BATCHES];
            for (k, acc) in per.iter_mut().enumerate() {
                let lookup = |r: f64, from: PhaseState, _to: PhaseState| {
                    cache.get(&key(r, from.y)).map_or(f64::NAN, |v| v[k * UV_CELLS + c])
                };
                for &(_, s, w) in s_nodes.iter().filter(|n| n.0 == si) {
                    *acc += w * triplet_density_g0(TRIPLET_T, start, s, st(0.0, 0.0), &lookup, &spec)?;
                }
            }
            let m = per.iter().sum::<f64>() / BATCHES as f64;
            let var = per.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
            out.push(EstimateCI { mean: m, stderr: (var / BATCHES as f64).sqrt(), n: per_batch * BATCHES as u64 });
        }
    }
    Ok(out)
}

pub fn check_lastpassage_penalization(cfg: &HarnessConfig) -> Result<CheckReport> {
    let n_mart = cfg.paths(60_000);
    let n_triplet = cfg.paths(200_000);
    let per_node = cfg.paths(2_000);
    let phi = lastpassage_weight();
    let start = st(1.0, 0.0);
    let times = [0.5, 1.0, 1.5];
    let mut b = Builder::new(
        "lastpassage_penalization",
        cfg,
        json!({
            "phi": phi.breakpoints(), "start": [1.0, 0.0], "times": times, "n_martingale": n_mart,
            "triplet": { "t": TRIPLET_T, "s_edges": S_EDGES, "u_edges": U_EDGES, "v_edges": V_EDGES,
                         "n_direct": n_triplet, "per_node": per_node, "batches": BATCHES },
            "streams": [500, 501, 502],
        }),
    );
    let exact = QuadratureSpec::default();
    let spec = QuadratureSpec::default().with_tol(1e-8, 1e-6);
    let cap = phi_cap_lastpassage(start, &phi, &exact)?;
    let table = HFast::global();
    let tr = Tracking { levels: vec![0.0], observe: times.to_vec(), ..Tracking::default() };
    // out: M_1, N_{0.5}, N_1, N_{1.5}, N_{0.5} − N_1, N_1 − N_{1.5}
    let est = estimate_with(6, n_mart, cfg.rng(500), |r, out| {
        let p = simulate_tracked(start, 1.5, 1.5, &tr, r)?;
        let mut nv = [0.0; 3];
        for (i, &t) in times.iter().enumerate() {
            let s = p.at(t).expect("observation reached");
            nv[i] = azema_remainder(t, st(s.x, s.y), &phi, &spec)?;
        }
        let s1 = p.at(1.0).expect("observation reached");
        let g = p.last_zero_before(1.0)?;
        out[0] = phi.value(g.time()) * table.h_reflected(st(s1.x, s1.y))? + nv[1];
        out[1..4].copy_from_slice(&nv);
        out[4] = nv[0] - nv[1];
        out[5] = nv[1] - nv[2];
        Ok(())
    })?;
    b.push(Part::sigma("mean_M_1", est[0], cap, 3.0, 0.0).at(1.0));
    for (i, &t) in times.iter().enumerate() {
        let z = scaled(est[1 + i], 1.0 / cap);
        let mut p = Part::range(format!("azema.E_Q[Z_t].t={t}"), z.mean, 0.0, 1.0).at(t);
        p.stderr = Some(z.stderr);
        b.push(p);
    }
    for (i, w) in times.windows(2).enumerate() {
        let d = est[4 + i];
        let mut p = Part::at_most(format!("azema.decrease.{}-{}", w[0], w[1]), -d.mean, 3.0 * d.stderr).at(w[1]);
        p.stderr = Some(d.stderr);
        b.push(p);
    }
    // t past the support: M_t = φ(g)h̃ exactly, no remainder
    let s = st(0.4, -0.3);
    let late = martingale_lastpassage(2.5, LastZero::At(1.2), s, &phi, &exact)?;
    b.push(Part::abs("structure.t>=support_end", late, phi.value(1.2) * table.h_reflected(s)?, 0.0));
    b.push(Part::abs("structure.remainder_past_support", azema_remainder(2.0, s, &phi, &exact)?, 0.0, 0.0));

    let tr = Tracking { levels: vec![0.0], ..Tracking::default() };
    let ncell = (S_EDGES.len() - 1) * UV_CELLS;
    let direct = estimate_with(ncell, n_triplet, cfg.rng(501), |r, out| {
        let p = simulate_tracked(start, TRIPLET_T, TRIPLET_T, &tr, r)?;
        if let LastZero::At(g) = p.last_zero_before(TRIPLET_T)? {
            if let (Some(si), Some(c)) = (bin(&S_EDGES, g), uv_cell(p.end.x, p.end.y)) {
                out[si * UV_CELLS + c] = 1.0;
            }
        }
        Ok(())
    })?;
    let from_density = triplet_cells_from_density(cfg, start, per_node, 502)?;
    let z: Vec<f64> = direct.iter().zip(&from_density).map(|(a, c)| cell_z(*a, *c)).collect();
    for (k, (a, c)) in direct.iter().zip(&from_density).enumerate() {
        b.push(cell_part(format!("triplet.cell{k}"), *a, *c));
    }
    for p in cell_family("triplet", &z) {
        b.push(p);
    }
    Ok(b.finish())
}

pub fn check_supremum_penalization(cfg: &HarnessConfig) -> Result<CheckReport> {
    let n_mart = cfg.paths(200_000);
    let n_law = cfg.paths(200_000);
    let phi = PenaltyWeight::triangular(0.0, 1.0, 2.0, 1.0)?;
    let start = st(0.5, -0.5);
    let times = [0.5, 1.0, 2.0];
    let levels = [1.0, 1.5];
    let horizon = 50.0;
    let mut b = Builder::new(
        "supremum_penalization",
        cfg,
        json!({
            "phi": phi.breakpoints(), "start": [0.5, -0.5], "times": times, "sup_tol": 1e-4,
            "tail_levels": levels, "horizon": horizon, "n_martingale": n_mart, "n_law": n_law, "streams": [600, 601],
        }),
    );
    let spec = QuadratureSpec::default();
    let cap = phi_cap_supremum(start, &phi, &spec)?;
    b.push(Part::rel("phi_cap.by_parts_vs_direct", cap, phi_cap_supremum_direct(start, &phi, &spec)?, 1e-8));
    let tr = Tracking { observe: times.to_vec(), sup_tol: Some(1e-4), ..Tracking::default() };
    let est = estimate_with(times.len(), n_mart, cfg.rng(600), |r, out| {
        let p = simulate_tracked(start, 2.0, 2.0, &tr, r)?;
        for (i, &t) in times.iter().enumerate() {
            let s = p.at(t).expect("observation reached");
            out[i] = martingale_supremum(s.sup, st(s.x, s.y), &phi, &spec)?;
        }
        Ok(())
    })?;
    for (t, e) in times.iter().zip(est) {
        b.push(Part::sigma(format!("mean_M_u.u={t}"), e, cap, 3.0, 0.0).at(*t));
    }
    // Tail: ∫_c^∞ φ ∂_z h(z − X, −B) dz stopped at T_c. Atom: h(x − X, −B) stopped at T_x.
    let x0 = start.x;
    let tr = Tracking {
        levels: vec![x0, levels[0], levels[1]],
        stop: Some(StopRule { level: levels[1], count: 1 }),
        ..Tracking::default()
    };
    let table = HFast::global();
    let est = estimate_with(3, n_law, cfg.rng(601), |r, out| {
        let p = simulate_tracked(start, horizon, horizon, &tr, r)?;
        for (i, &c) in levels.iter().enumerate() {
            let s = match p.first_crossing(c) {
                Some(k) => st(c, k.velocity),
                None => st(p.end.x, p.end.y),
            };
            out[i] = s_infinity_tail_mass(s, &phi, c, &spec)? / cap;
        }
        if p.first_crossing(x0).is_none() {
            out[2] = phi.value(x0) * table.h(st(x0 - p.end.x, -p.end.y))? / cap;
        }
        Ok(())
    })?;
    for (i, &c) in levels.iter().enumerate() {
        let law = s_infinity_law(start, &phi, c, &spec)?;
        b.push(Part::sigma(format!("tail.c={c}"), est[i], law, 3.0, 0.0).at(c));
    }
    let atom = s_infinity_atom(start, &phi, &spec)?;
    b.push(Part::sigma("atom", est[2], atom, 3.0, 0.0));
    Ok(b.finish())
}

const NTH_T_EDGES: [f64; 6] = [0.2, 0.5, 1.0, 2.0, 5.0, 10.0];
const NTH_Z_EDGES: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 3.0];
const SLOPE_TIMES: [f64; 7] = [10.0, 21.5, 46.4, 100.0, 215.0, 464.0, 1000.0];

// ∫∫ over a (t, z) cell of the n-th passage density, Gauss–Legendre in (ln t, z).
fn nth_cell_mass(n: u32, t: (f64, f64), z: (f64, f64), spec: &QuadratureSpec) -> Result<f64> {
    let (gx, gw) = gauss_legendre(8);
    let (l0, l1) = (t.0.ln(), t.1.ln());
    let mut total = 0.0;
    for (xi, wi) in gx.iter().zip(&gw) {
        let tt = (0.5 * (l0 + l1) + 0.5 * (l1 - l0) * xi).exp();
        for (xj, wj) in gx.iter().zip(&gw) {
            let zz = 0.5 * (z.0 + z.1) + 0.5 * (z.1 - z.0) * xj;
            let d = nth_passage_joint_density(n, 1.0, tt, zz, spec)?;
            total += wi * wj * 0.25 * (l1 - l0) * (z.1 - z.0) * tt * d;
        }
    }
    Ok(total)
}

pub fn check_nth_passage(cfg: &HarnessConfig, n_list: &[u32]) -> Result<CheckReport> {
    let n_cells = cfg.paths(200_000);
    let n_slope = cfg.paths(400_000);
    let mut b = Builder::new(
        "nth_passage",
        cfg,
        json!({
            "n": n_list, "b": 1.0, "t_edges": NTH_T_EDGES, "z_edges": NTH_Z_EDGES, "n_cells": n_cells,
            "slope_times": SLOPE_TIMES, "n_slope": n_slope, "streams": [700, 701, 702],
        }),
    );
    if n_list.is_empty() || n_list.contains(&0) {
        return domain("nth passage check needs indices >= 1");
    }
    let nmax = *n_list.iter().max().unwrap() as usize;
    let start = st(0.0, 1.0);
    let spec = QuadratureSpec::default().with_tol(1e-10, 1e-8);
    let (nt, nz) = (NTH_T_EDGES.len() - 1, NTH_Z_EDGES.len() - 1);
    let per_n = nt * nz;
    let horizon = NTH_T_EDGES[nt];
    let tr = killed_at(0.0, nmax);
    let est = estimate_with(n_list.len() * per_n, n_cells, cfg.rng(700), |r, out| {
        let p = simulate_tracked(start, horizon, horizon, &tr, r)?;
        let pt = passage_times(&p, 0.0, nmax)?;
        for (j, &n) in n_list.iter().enumerate() {
            if let Some(&(t, v)) = pt.get(n as usize - 1) {
                if let (Some(it), Some(iz)) = (bin(&NTH_T_EDGES, t), bin(&NTH_Z_EDGES, v.abs() / t.sqrt())) {
                    out[j * per_n + it * nz + iz] = 1.0;
                }
            }
        }
        Ok(())
    })?;
    for (j, &n) in n_list.iter().enumerate() {
        let mut z = Vec::new();
        for it in 0..nt {
            for iz in 0..nz {
                let m = nth_cell_mass(
                    n,
                    (NTH_T_EDGES[it], NTH_T_EDGES[it + 1]),
                    (NTH_Z_EDGES[iz], NTH_Z_EDGES[iz + 1]),
                    &spec,
                )?;
                let e = est[j * per_n + it * nz + iz];
                let exact = EstimateCI { mean: m, stderr: 0.0, n: 0 };
                z.push(cell_z(e, exact));
                b.push(cell_part(format!("density.n={n}.cell({it},{iz})"), e, exact));
            }
        }
        for p in cell_family(&format!("density.n={n}"), &z) {
            b.push(p);
        }
    }

    // P(T^{(2)} > t)/P(T^{(1)} > t) against ln t. T^{(2)} > T^{(1)}, so Cov(1_{T1>t}, 1_{T2>t})
    // = p1(1 − p2).
    let tmax = SLOPE_TIMES[SLOPE_TIMES.len() - 1];
    let surv = |s: PhaseState, shift: f64, stream: u64| -> Result<Vec<EstimateCI>> {
        let times: Vec<f64> = SLOPE_TIMES.iter().map(|t| t - shift).collect();
        let tr = Tracking { observe: times.clone(), ..killed_at(0.0, 2) };
        estimate_with(2 * times.len(), n_slope, cfg.rng(stream), |r, out| {
            let p = simulate_tracked(s, tmax - shift, tmax - shift, &tr, r)?;
            let first = p.first_crossing(0.0).map_or(f64::INFINITY, |c| c.time);
            for (i, &t) in times.iter().enumerate() {
                out[2 * i] = f64::from(u8::from(first > t));
                out[2 * i + 1] = f64::from(u8::from(p.at(t).is_some()));
            }
            Ok(())
        })
    };
    let base = surv(start, 0.0, 701)?;
    let mut ratios = Vec::new();
    for i in 0..SLOPE_TIMES.len() {
        let (p1, p2) = (base[2 * i], base[2 * i + 1]);
        let r = p2.mean / p1.mean;
        let n = p1.n as f64;
        let (v1, v2) = (p1.mean * (1.0 - p1.mean), p2.mean * (1.0 - p2.mean));
        let c = p1.mean * (1.0 - p2.mean);
        let var = (v2 / (p1.mean * p1.mean) + r * r * v1 / (p1.mean * p1.mean) - 2.0 * r * c / (p1.mean * p1.mean)) / n;
        let e = EstimateCI { mean: r, stderr: var.max(0.0).sqrt(), n: p1.n };
        let mut p = Part::report(format!("ratio.t={}", SLOPE_TIMES[i]), r).at(SLOPE_TIMES[i]);
        p.stderr = Some(e.stderr);
        b.push(p);
        ratios.push(e);
    }
    let lx: Vec<f64> = SLOPE_TIMES.iter().map(|t| t.ln()).collect();
    let (slope, se) = wls_slope(&lx, &ratios);
    let printed = (9.0 / (4.0 * PI * PI)).sqrt();
    let mut p = Part::rel("slope.printed", slope, printed, 0.25);
    p.stderr = Some(se);
    b.push(p);
    let mut p = Part::rel("slope.corrected", slope, printed / 2.0, 0.25).info();
    p.stderr = Some(se);
    b.push(p);

    // Penalising by 1_{T^{(2)} > t} at s = 1 in state (1, 0) with no zero yet: the ratio
    // P_{(1,0)}(T^{(2)} > t − 1)/P_{(0,1)}(T^{(2)} > t) tends to h(1, 0)/h(0, 1). Both
    // survival functions are c(ln t + d) t^{−1/4} to leading orders, so the ratio is fitted
    // as A(L + c₁)/(L + c₂), L = ln t, linearised as rL = AL + Ac₁ − c₂r.
    let moved = surv(st(1.0, 0.0), 1.0, 702)?;
    let target = HFast::global().h(st(1.0, 0.0))? / HFast::global().h(start)?;
    let mut pen = Vec::new();
    for (i, &t) in SLOPE_TIMES.iter().enumerate() {
        let r = ratio_indep(moved[2 * i + 1], base[2 * i + 1]);
        let mut part = Part::rel(format!("penalization_ratio.t={t}"), r.mean, target, 0.25).at(t).info();
        part.stderr = Some(r.stderr);
        b.push(part);
        pen.push(r);
    }
    for (i, w) in pen.windows(2).enumerate() {
        let (g0, g1) = ((w[0].mean - target).abs(), (w[1].mean - target).abs());
        let t = SLOPE_TIMES[i + 1];
        b.push(Part::at_most(format!("penalization_trend.gap.t={t}"), g1, g0 + 3.0 * w[0].stderr.hypot(w[1].stderr)).at(t));
    }
    let rows: Vec<Vec<f64>> = lx.iter().zip(&pen).map(|(l, r)| vec![l / r.stderr, 1.0 / r.stderr, -r.mean / r.stderr]).collect();
    let ys: Vec<f64> = lx.iter().zip(&pen).map(|(l, r)| r.mean * l / r.stderr).collect();
    let limit = least_squares(&rows, &ys)[0];
    b.push(Part::rel("penalization_trend.extrapolated_limit", limit, target, 0.25));
    Ok(b.finish())
}
