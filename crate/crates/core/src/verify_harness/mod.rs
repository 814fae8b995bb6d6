//! Named verification experiments, one per result, each with a pass/fail gate and the raw
//! numbers behind it.
//!
//! A check is a list of [`Part`]s. Gating parts decide `pass`; informational parts carry
//! related numbers (for instance the same quantity against a corrected constant). Path
//! counts are fixed per check and multiplied by [`HarnessConfig::scale`].

mod analytic;
mod stochastic;

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mc_engine::{EstimateCI, RngSpec};

pub use analytic::{check_appendix_identities, check_harmonicity, check_transition_identities, fit_beta, BETA_FIT_WINDOW};
pub use stochastic::{
    check_h_martingale, check_lastpassage_penalization, check_lemma_hbta, check_nth_passage, check_q_conditioned,
    check_supremum_penalization, check_survival_asymptotic, QSuite,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Multiplies every pre-registered path count.
    pub scale: f64,
    /// Report runtime as 0 so reruns give identical bytes.
    pub deterministic: bool,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { seed: 20_240_611, scale: 1.0, deterministic: false }
    }
}

impl HarnessConfig {
    pub fn paths(&self, base: u64) -> u64 {
        ((base as f64 * self.scale).round() as u64).max(2)
    }

    pub(crate) fn rng(&self, stream: u64) -> RngSpec {
        RngSpec { seed: self.seed, stream }
    }
}

// JSON has no NaN; it is written as null and read back as NaN.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&(!x.is_nan()).then_some(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    /// Abscissa (time, level, ...) when the part belongs to a series.
    pub at: Option<f64>,
    #[serde(with = "nan_as_null")]
    pub observed: f64,
    #[serde(with = "nan_as_null")]
    pub expected: f64,
    pub stderr: Option<f64>,
    pub rule: String,
    pub pass: bool,
    pub gating: bool,
}

impl Part {
    fn new(name: impl Into<String>, observed: f64, expected: f64, rule: String, pass: bool) -> Part {
        Part { name: name.into(), at: None, observed, expected, stderr: None, rule, pass, gating: true }
    }

    pub fn rel(name: impl Into<String>, observed: f64, expected: f64, tol: f64) -> Part {
        let e = ((observed - expected) / expected).abs();
        Part::new(name, observed, expected, format!("rel err <= {tol:e}"), e <= tol)
    }

    pub fn abs(name: impl Into<String>, observed: f64, expected: f64, tol: f64) -> Part {
        let e = (observed - expected).abs();
        Part::new(name, observed, expected, format!("abs err <= {tol:e}"), e <= tol)
    }

    /// |mean − expected| <= sigmas·stderr + bias.
    pub fn sigma(name: impl Into<String>, est: EstimateCI, expected: f64, sigmas: f64, bias: f64) -> Part {
        let gap = (est.mean - expected).abs();
        let rule = if bias > 0.0 {
            format!("|gap| <= {sigmas}σ + {bias:e}")
        } else {
            format!("|gap| <= {sigmas}σ")
        };
        let mut p = Part::new(name, est.mean, expected, rule, gap <= sigmas * est.stderr + bias || gap == 0.0);
        p.stderr = Some(est.stderr);
        p
    }

    /// Two independent estimates agree: |a − b| <= sigmas·√(σ_a² + σ_b²).
    pub fn two_sample(name: impl Into<String>, a: EstimateCI, b: EstimateCI, sigmas: f64) -> Part {
        let se = a.stderr.hypot(b.stderr);
        let gap = (a.mean - b.mean).abs();
        let mut p = Part::new(name, a.mean, b.mean, format!("|gap| <= {sigmas}σ (two-sample)"), gap <= sigmas * se || gap == 0.0);
        p.stderr = Some(se);
        p
    }

    pub fn range(name: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Part {
        Part::new(name, observed, 0.5 * (lo + hi), format!("in [{lo}, {hi}]"), observed >= lo && observed <= hi)
    }

    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Part {
        Part::new(name, observed, bound, format!("<= {bound:e}"), observed <= bound)
    }

    pub fn flag(name: impl Into<String>, ok: bool, rule: &str) -> Part {
        Part::new(name, f64::from(u8::from(ok)), 1.0, rule.to_string(), ok)
    }

    /// A number carried for the record, with no rule attached.
    pub fn report(name: impl Into<String>, observed: f64) -> Part {
        Part::new(name, observed, f64::NAN, "reported only".into(), true).info()
    }

    pub fn info(mut self) -> Part {
        self.gating = false;
        self
    }

    pub fn at(mut self, x: f64) -> Part {
        self.at = Some(x);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: String,
    #[serde(with = "nan_as_null::vec")]
    pub observed: Vec<f64>,
    #[serde(with = "nan_as_null::vec")]
    pub expected: Vec<f64>,
    pub tolerance: String,
    pub pass: bool,
    pub runtime_s: f64,
    pub config_digest: String,
    pub seed: u64,
    pub parts: Vec<Part>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn part(&self, name: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.name == name)
    }

    /// Parts whose name starts with `prefix`.
    pub fn parts_named<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Part> + 'a {
        self.parts.iter().filter(move |p| p.name.starts_with(prefix))
    }
}

pub(crate) struct Builder {
    id: &'static str,
    config: serde_json::Value,
    seed: u64,
    started: Instant,
    deterministic: bool,
    parts: Vec<Part>,
    notes: Vec<String>,
}

impl Builder {
    pub(crate) fn new(id: &'static str, cfg: &HarnessConfig, params: serde_json::Value) -> Builder {
        let config = serde_json::json!({ "check_id": id, "seed": cfg.seed, "scale": cfg.scale, "params": params });
        Builder {
            id,
            config,
            seed: cfg.seed,
            started: Instant::now(),
            deterministic: cfg.deterministic,
            parts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, p: Part) {
        self.parts.push(p);
    }

    pub(crate) fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub(crate) fn finish(self) -> CheckReport {
        let gating: Vec<&Part> = self.parts.iter().filter(|p| p.gating).collect();
        let pass = !gating.is_empty() && gating.iter().all(|p| p.pass);
        let digest = config_digest(&self.config);
        let runtime_s = if self.deterministic { 0.0 } else { self.started.elapsed().as_secs_f64() };
        CheckReport {
            check_id: self.id.to_string(),
            observed: gating.iter().map(|p| p.observed).collect(),
            expected: gating.iter().map(|p| p.expected).collect(),
            tolerance: "every gating part meets its rule".into(),
            pass,
            runtime_s,
            config_digest: digest,
            seed: self.seed,
            parts: self.parts,
            notes: self.notes,
        }
    }
}

/// SHA-256 of the compact JSON form of `config`, hex encoded.
pub fn config_digest(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

// Least squares for small dense systems via normal equations.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, &yy) in rows.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * yy;
        }
    }
    for i in 0..p {
        let piv = a[i][i];
        for v in a[i].iter_mut() {
            *v /= piv;
        }
        for k in 0..p {
            if k != i {
                let f = a[k][i];
                let row = a[i].clone();
                for (v, r) in a[k].iter_mut().zip(row) {
                    *v -= f * r;
                }
            }
        }
    }
    a.iter().map(|r| r[p]).collect()
}

/// Largest number of cells allowed beyond 3σ among `m` independent cells: the smallest k
/// with P(Binomial(m, 0.0027) > k) < 0.0027.
pub fn allowed_exceedances(m: usize) -> usize {
    let p: f64 = 0.0027;
    let mut term = (1.0 - p).powi(m as i32);
    let mut cdf = term;
    let mut k = 0;
    while 1.0 - cdf >= p && k < m {
        term *= (m - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
        k += 1;
        cdf += term;
    }
    k
}

/// Family gate over cell-wise z-scores: at most [`allowed_exceedances`] cells beyond 3σ
/// and none beyond 4.5σ.
pub(crate) fn cell_family(name: &str, z: &[f64]) -> Vec<Part> {
    let beyond = z.iter().filter(|&&v| v > 3.0).count();
    let worst = z.iter().copied().fold(0.0, f64::max);
    let allowed = allowed_exceedances(z.len());
    vec![
        Part::at_most(format!("{name}.cells_beyond_3sigma"), beyond as f64, allowed as f64),
        Part::at_most(format!("{name}.worst_z"), worst, 4.5),
    ]
}

pub type CheckFn = fn(&HarnessConfig) -> Result<CheckReport>;

fn run_q_default(cfg: &HarnessConfig) -> Result<CheckReport> {
    check_q_conditioned(cfg, QSuite::default())
}

fn run_h_martingale(cfg: &HarnessConfig) -> Result<CheckReport> {
    check_h_martingale(cfg, &[0.0, 1.0, 4.0])
}

fn run_survival(cfg: &HarnessConfig) -> Result<CheckReport> {
    check_survival_asymptotic(cfg, &[10.0, 100.0, 1000.0])
}

fn run_nth(cfg: &HarnessConfig) -> Result<CheckReport> {
    check_nth_passage(cfg, &[1, 2])
}

/// Every check, in suite order, with whether it is analytic (no Monte Carlo).
pub const CHECKS: &[(&str, bool, CheckFn)] = &[
    ("harmonicity", true, check_harmonicity),
    ("transition_identities", true, check_transition_identities),
    ("appendix_identities", true, check_appendix_identities),
    ("h_martingale", false, run_h_martingale),
    ("survival_asymptotic", false, run_survival),
    ("lemma_hbta", false, check_lemma_hbta),
    ("q_conditioned", false, run_q_default),
    ("lastpassage_penalization", false, check_lastpassage_penalization),
    ("supremum_penalization", false, check_supremum_penalization),
    ("nth_passage", false, run_nth),
];

/// Resolves a filter: empty = all checks; `analytic` / `stochastic` select a half of the
/// suite; otherwise each entry must be a check id.
pub fn select(filter: &[String]) -> Result<Vec<&'static str>> {
    if filter.is_empty() {
        return Ok(CHECKS.iter().map(|c| c.0).collect());
    }
    let mut out = Vec::new();
    for f in filter {
        let picked: Vec<&'static str> = match f.as_str() {
            "analytic" => CHECKS.iter().filter(|c| c.1).map(|c| c.0).collect(),
            "stochastic" => CHECKS.iter().filter(|c| !c.1).map(|c| c.0).collect(),
            id => match CHECKS.iter().find(|c| c.0 == id) {
                Some(c) => vec![c.0],
                None => return Err(Error::Config(format!("unknown check id '{id}'"))),
            },
        };
        for p in picked {
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

pub fn run_check(id: &str, cfg: &HarnessConfig) -> Result<CheckReport> {
    match CHECKS.iter().find(|c| c.0 == id) {
        Some(c) => (c.2)(cfg),
        None => Err(Error::Config(format!("unknown check id '{id}'"))),
    }
}

/// Runs the selected checks as parallel jobs; reports come back in `ids` order.
pub fn run_suite(ids: &[&str], cfg: &HarnessConfig) -> Vec<(String, Result<CheckReport>)> {
    ids.par_iter().map(|id| (id.to_string(), run_check(id, cfg))).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(";")
}

/// Roll-up CSV, one row per report.
pub fn rollup_csv(reports: &[CheckReport]) -> String {
    let mut s = String::from("check_id,observed,expected,tol,pass,runtime_s,seed\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},\"{}\",\"{}\",\"{}\",{},{:.16e},{}",
            r.check_id,
            fmt_list(&r.observed),
            fmt_list(&r.expected),
            r.tolerance.replace('"', "\"\""),
            r.pass,
            r.runtime_s,
            r.seed
        );
    }
    s
}

/// Writes `<dir>/<check_id>.json` per report and `<dir>/summary.csv`.
pub fn write_reports(dir: &Path, reports: &[CheckReport]) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("writing reports to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for r in reports {
        let body = serde_json::to_string_pretty(r).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join(format!("{}.json", r.check_id)), body + "\n").map_err(io)?;
    }
    std::fs::write(dir.join("summary.csv"), rollup_csv(reports)).map_err(io)?;
    Ok(())
}
