use std::path::PathBuf;

use serde_json::{json, Value};

use ibm_toolkit::ibm_core::{h_eval, survival_asymptotic, PhaseState};
use ibm_toolkit::mc_engine::{
    estimate_with, killed_density_histogram, simulate_conditioned_tracked, simulate_tracked, Histogram2dSpec, RngSpec,
    StopRule, Tracking,
};
use ibm_toolkit::verify_harness::config_digest;

use crate::config::RunConfig;
use crate::table::{write_file, Cell, Table};
use crate::CliError;

pub struct Scenario {
    pub name: &'static str,
    pub about: &'static str,
    /// Parameters and their defaults.
    pub defaults: fn() -> Vec<(&'static str, Value)>,
    run: fn(&RunConfig) -> Result<Table, CliError>,
}

pub const SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "t0_histogram",
        about: "histogram of the first zero time T_0 on [0, t_max], one row per bin",
        defaults: || vec![("x", json!(1.0)), ("y", json!(0.0)), ("n_paths", json!(100_000)), ("t_max", json!(10.0)), ("bins", json!(20))],
        run: t0_histogram,
    },
    Scenario {
        name: "survival",
        about: "P(T_0 > t) at the given times, with the large-t equivalent",
        defaults: || vec![("x", json!(1.0)), ("y", json!(0.0)), ("n_paths", json!(100_000)), ("times", json!([1.0, 10.0, 100.0]))],
        run: survival,
    },
    Scenario {
        name: "h_martingale",
        about: "E[h(X_t, B_t); t < T_0] against h(x, y)",
        defaults: || vec![("x", json!(1.0)), ("y", json!(0.0)), ("n_paths", json!(100_000)), ("times", json!([1.0, 4.0]))],
        run: h_martingale,
    },
    Scenario {
        name: "killed_histogram",
        about: "density of (X_t, B_t) on {T_0 > t} on a u-v grid",
        defaults: || {
            vec![
                ("x", json!(1.0)),
                ("y", json!(0.0)),
                ("t", json!(1.0)),
                ("n_paths", json!(100_000)),
                ("u_lo", json!(0.0)),
                ("u_hi", json!(3.0)),
                ("nu", json!(10)),
                ("v_lo", json!(-2.5)),
                ("v_hi", json!(2.5)),
                ("nv", json!(10)),
            ]
        },
        run: killed_histogram,
    },
    Scenario {
        name: "conditioned_paths",
        about: "per-path samples of the process conditioned never to hit 0",
        defaults: || {
            vec![
                ("x", json!(1.0)),
                ("y", json!(0.0)),
                ("n_paths", json!(10)),
                ("horizon", json!(10.0)),
                ("dt", json!(0.1)),
                ("base", json!(0.01)),
            ]
        },
        run: conditioned_paths,
    },
];

pub fn find(name: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name)
}

pub fn usage_list() -> String {
    let mut s = String::from("scenarios:\n");
    for sc in SCENARIOS {
        let keys: Vec<String> = (sc.defaults)().iter().map(|(k, v)| format!("{k}={v}")).collect();
        s.push_str(&format!("  {:<18} {}\n  {:<18} defaults: {}\n", sc.name, sc.about, "", keys.join(" ")));
    }
    s
}

/// Fills in defaults and checks keys; the result is the config recorded next to the output.
pub fn resolve(cfg: &RunConfig) -> Result<(RunConfig, &'static Scenario), CliError> {
    let name = cfg
        .str_param("scenario")?
        .ok_or_else(|| CliError::Usage(format!("sim needs a scenario\n{}", usage_list())))?;
    let sc = find(&name).ok_or_else(|| CliError::Usage(format!("unknown scenario '{name}'\n{}", usage_list())))?;
    let defaults = (sc.defaults)();
    let mut allowed: Vec<&str> = defaults.iter().map(|d| d.0).collect();
    allowed.push("scenario");
    cfg.check_keys(&allowed)?;
    let mut out = cfg.clone();
    for (k, v) in defaults {
        out.params.entry(k.to_string()).or_insert(v);
    }
    Ok((out, sc))
}

/// Runs the scenario and writes `<out>/<scenario>.<ext>` and `<out>/config.json`.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let (cfg, sc) = resolve(cfg)?;
    let table = (sc.run)(&cfg)?;
    let dir = PathBuf::from(cfg.output_path.clone().unwrap_or_else(|| "sim_out".into()));
    let data = dir.join(format!("{}.{}", sc.name, cfg.format.ext()));
    write_file(&data, &table.render(cfg.format)?)?;
    let cfg_value = serde_json::to_value(&cfg).expect("config serializes");
    let record = json!({ "config": cfg_value, "config_digest": config_digest(&cfg_value) });
    let meta = dir.join("config.json");
    write_file(&meta, (serde_json::to_string_pretty(&record).expect("serializes") + "\n").as_bytes())?;
    Ok(vec![data, meta])
}

fn req(cfg: &RunConfig, key: &str) -> Result<f64, CliError> {
    cfg.number(key)?.ok_or_else(|| CliError::Usage(format!("missing parameter '{key}'")))
}

fn req_count(cfg: &RunConfig, key: &str) -> Result<u64, CliError> {
    cfg.count(key)?.ok_or_else(|| CliError::Usage(format!("missing parameter '{key}'")))
}

fn start(cfg: &RunConfig) -> Result<PhaseState, CliError> {
    Ok(PhaseState::new(req(cfg, "x")?, req(cfg, "y")?))
}

fn times(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let t = cfg.numbers("times")?.ok_or_else(|| CliError::Usage("missing parameter 'times'".into()))?;
    if t.windows(2).any(|w| !(w[0] < w[1])) || t.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(CliError::Usage("times must be positive and increasing".into()));
    }
    Ok(t)
}

fn killed() -> Tracking {
    Tracking { levels: vec![0.0], stop: Some(StopRule { level: 0.0, count: 1 }), ..Tracking::default() }
}

fn t0_histogram(cfg: &RunConfig) -> Result<Table, CliError> {
    let s = start(cfg)?;
    let t_max = req(cfg, "t_max")?;
    let bins = req_count(cfg, "bins")? as usize;
    if bins == 0 || !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Usage("needs bins >= 1 and t_max > 0".into()));
    }
    let width = t_max / bins as f64;
    let tr = killed();
    let est = estimate_with(bins, req_count(cfg, "n_paths")?, RngSpec::new(cfg.seed, 0), |r, out| {
        let p = simulate_tracked(s, t_max, t_max, &tr, r)?;
        if p.stopped {
            let k = ((p.end.t / width) as usize).min(bins - 1);
            out[k] = 1.0 / width;
        }
        Ok(())
    })
    .map_err(CliError::from_lib)?;
    let mut t = Table::new(&["t_lo", "t_hi", "density", "stderr"]);
    for (k, e) in est.iter().enumerate() {
        t.push(vec![Cell::Num(k as f64 * width), Cell::Num((k + 1) as f64 * width), Cell::Num(e.mean), Cell::Num(e.stderr)]);
    }
    Ok(t)
}

fn survival(cfg: &RunConfig) -> Result<Table, CliError> {
    let s = start(cfg)?;
    let ts = times(cfg)?;
    let horizon = *ts.last().expect("times is nonempty");
    let tr = Tracking { observe: ts.clone(), ..killed() };
    let est = estimate_with(ts.len(), req_count(cfg, "n_paths")?, RngSpec::new(cfg.seed, 0), |r, out| {
        let p = simulate_tracked(s, horizon, horizon, &tr, r)?;
        for (o, &t) in out.iter_mut().zip(&ts) {
            *o = if p.stopped && p.end.t <= t { 0.0 } else { 1.0 };
        }
        Ok(())
    })
    .map_err(CliError::from_lib)?;
    let mut t = Table::new(&["t", "survival", "stderr", "asymptotic"]);
    for (e, &tt) in est.iter().zip(&ts) {
        let a = survival_asymptotic(tt, s).map_err(CliError::from_lib)?;
        t.push(vec![Cell::Num(tt), Cell::Num(e.mean), Cell::Num(e.stderr), Cell::Num(a)]);
    }
    Ok(t)
}

fn h_martingale(cfg: &RunConfig) -> Result<Table, CliError> {
    let s = start(cfg)?;
    let ts = times(cfg)?;
    let horizon = *ts.last().expect("times is nonempty");
    let tr = Tracking { observe: ts.clone(), ..killed() };
    let est = estimate_with(ts.len(), req_count(cfg, "n_paths")?, RngSpec::new(cfg.seed, 0), |r, out| {
        let p = simulate_tracked(s, horizon, horizon, &tr, r)?;
        for (o, &t) in out.iter_mut().zip(&ts) {
            *o = match p.at(t) {
                Some(smp) if !(p.stopped && p.end.t <= t) => h_eval(PhaseState::new(smp.x, smp.y))?,
                _ => 0.0,
            };
        }
        Ok(())
    })
    .map_err(CliError::from_lib)?;
    let h0 = h_eval(s).map_err(CliError::from_lib)?;
    let mut t = Table::new(&["t", "mean", "stderr", "h"]);
    for (e, &tt) in est.iter().zip(&ts) {
        t.push(vec![Cell::Num(tt), Cell::Num(e.mean), Cell::Num(e.stderr), Cell::Num(h0)]);
    }
    Ok(t)
}

fn killed_histogram(cfg: &RunConfig) -> Result<Table, CliError> {
    let bins = Histogram2dSpec {
        u_lo: req(cfg, "u_lo")?,
        u_hi: req(cfg, "u_hi")?,
        nu: req_count(cfg, "nu")? as usize,
        v_lo: req(cfg, "v_lo")?,
        v_hi: req(cfg, "v_hi")?,
        nv: req_count(cfg, "nv")? as usize,
    };
    let h = killed_density_histogram(start(cfg)?, req(cfg, "t")?, bins, req_count(cfg, "n_paths")?, RngSpec::new(cfg.seed, 0))
        .map_err(CliError::from_lib)?;
    let mut t = Table::new(&["u_lo", "u_hi", "v_lo", "v_hi", "density", "stderr"]);
    for (k, e) in h.density.iter().enumerate() {
        let ((u0, u1), (v0, v1)) = h.spec.bounds(k);
        t.push(vec![Cell::Num(u0), Cell::Num(u1), Cell::Num(v0), Cell::Num(v1), Cell::Num(e.mean), Cell::Num(e.stderr)]);
    }
    Ok(t)
}

fn conditioned_paths(cfg: &RunConfig) -> Result<Table, CliError> {
    let s = start(cfg)?;
    let horizon = req(cfg, "horizon")?;
    let dt = req(cfg, "dt")?;
    let base = req(cfg, "base")?;
    if !(dt > 0.0 && horizon > 0.0 && horizon.is_finite()) {
        return Err(CliError::Usage("needs dt > 0 and horizon > 0".into()));
    }
    let n = (horizon / dt - 1e-9).ceil() as usize;
    let observe: Vec<f64> = (1..=n).map(|i| (i as f64 * dt).min(horizon)).collect();
    let tr = Tracking { observe, ..Tracking::default() };
    let spec = RngSpec::new(cfg.seed, 0);
    let mut t = Table::new(&["path", "t", "x", "y"]);
    for k in 0..req_count(cfg, "n_paths")? {
        let mut rng = spec.shard(k).rng();
        let (p, _) = simulate_conditioned_tracked(s, horizon, base, &tr, &mut rng).map_err(CliError::from_lib)?;
        for smp in &p.samples {
            t.push(vec![Cell::Int(k), Cell::Num(smp.t), Cell::Num(smp.x), Cell::Num(smp.y)]);
        }
    }
    Ok(t)
}
