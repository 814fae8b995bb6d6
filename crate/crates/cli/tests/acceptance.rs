//! Acceptance criteria 1-9 at the default seed and scale. Prints one PASS/FAIL line per
//! criterion. Three criteria test constants that do not match the formulas they come
//! with; their printed-constant comparisons are expected to fail and are asserted to
//! fail, while the corrected constants are asserted to pass.

use std::collections::BTreeMap;
use std::process::Command;

use ibm_toolkit::verify_harness::{run_suite, select, CheckReport, HarnessConfig, Part};

struct Verdict {
    pass: bool,
    detail: String,
}

fn part<'a>(r: &'a CheckReport, name: &str) -> &'a Part {
    r.part(name).unwrap_or_else(|| panic!("{}: no part {name}", r.check_id))
}

fn all_pass<'a>(parts: impl IntoIterator<Item = &'a Part>) -> bool {
    let v: Vec<&Part> = parts.into_iter().collect();
    !v.is_empty() && v.iter().all(|p| p.pass)
}

fn failing(parts: &[&Part]) -> String {
    let bad: Vec<String> = parts.iter().filter(|p| !p.pass).map(|p| p.name.clone()).collect();
    if bad.is_empty() {
        "all parts within tolerance".into()
    } else {
        format!("failing: {}", bad.join(", "))
    }
}

fn line(n: u32, v: &Verdict) {
    println!("criterion {n}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
}

fn criterion_1(r: &BTreeMap<String, CheckReport>) -> (Verdict, bool) {
    let harm = &r["harmonicity"];
    let tr = &r["transition_identities"];
    let app = &r["appendix_identities"];
    let mut parts: Vec<&Part> = app.parts_named("lebedev.printed").collect();
    parts.extend(app.parts_named("sech_transform"));
    parts.push(part(harm, "scaling.worst_rel_err"));
    parts.push(part(tr, "q_antisymmetry.worst"));
    parts.extend(harm.parts_named("residual_over_h."));
    parts.extend(tr.parts_named("n1_constant."));
    let v = Verdict { pass: all_pass(parts.iter().copied()), detail: failing(&parts) };
    let rest_ok = all_pass(parts.iter().copied().filter(|p| !p.name.starts_with("lebedev.printed")))
        && app.parts_named("lebedev.printed").all(|p| !p.pass && (p.observed / p.expected - 0.75).abs() < 1e-6)
        && all_pass(app.parts_named("lebedev.corrected"));
    (v, rest_ok)
}

fn criterion_2(r: &BTreeMap<String, CheckReport>) -> Verdict {
    let h = &r["h_martingale"];
    let parts = vec![
        part(h, "mean.t=1"),
        part(h, "mean.t=4"),
        part(&r["lastpassage_penalization"], "mean_M_1"),
        part(&r["supremum_penalization"], "mean_M_u.u=1"),
        part(&r["supremum_penalization"], "mean_M_u.u=2"),
    ];
    Verdict { pass: all_pass(parts.iter().copied()), detail: failing(&parts) }
}

fn criterion_3(r: &BTreeMap<String, CheckReport>) -> Verdict {
    let s = &r["survival_asymptotic"];
    let mut parts = vec![part(s, "ratio.t=100")];
    parts.extend(s.parts_named("trend."));
    let d = format!(
        "ratios {:.4} {:.4} {:.4}; {}",
        part(s, "ratio.t=10").observed,
        part(s, "ratio.t=100").observed,
        part(s, "ratio.t=1000").observed,
        failing(&parts)
    );
    Verdict { pass: all_pass(parts.iter().copied()), detail: d }
}

fn criterion_4(r: &BTreeMap<String, CheckReport>) -> Verdict {
    let l = &r["lemma_hbta"];
    let p = part(l, "mc_vs_printed");
    let parts = vec![p, part(l, "mc_vs_h(x,y)-h(x-a,y)")];
    let d = format!("mc {:.6} +- {:.6} vs {}; {}", p.observed, p.stderr.unwrap_or(f64::NAN), p.expected, failing(&parts));
    Verdict { pass: all_pass(parts.iter().copied()), detail: d }
}

fn criterion_5(r: &BTreeMap<String, CheckReport>) -> Verdict {
    let q = &r["q_conditioned"];
    let mut parts = vec![part(q, "zero_touches"), part(q, "hit_fraction"), part(q, "undecided_bias")];
    parts.extend(q.parts_named("histogram.").filter(|p| p.gating));
    Verdict { pass: all_pass(parts.iter().copied()), detail: failing(&parts) }
}

fn criterion_6(r: &BTreeMap<String, CheckReport>) -> (Verdict, bool) {
    let n = &r["nth_passage"];
    let mut parts: Vec<&Part> = n.parts_named("density.").filter(|p| p.gating).collect();
    let slope = part(n, "slope.printed");
    parts.push(slope);
    let d = format!("slope {:.4} vs printed {:.4}; {}", slope.observed, slope.expected, failing(&parts));
    let v = Verdict { pass: all_pass(parts.iter().copied()), detail: d };
    let rest_ok = all_pass(n.parts_named("density.").filter(|p| p.gating))
        && !slope.pass
        && part(n, "slope.corrected").pass
        && all_pass(n.parts_named("penalization_trend."));
    (v, rest_ok)
}

fn criterion_7(r: &BTreeMap<String, CheckReport>) -> Verdict {
    let s = &r["supremum_penalization"];
    let parts = vec![part(s, "tail.c=1"), part(s, "tail.c=1.5"), part(s, "atom")];
    Verdict { pass: all_pass(parts.iter().copied()), detail: failing(&parts) }
}

fn criterion_8(r: &BTreeMap<String, CheckReport>) -> (Verdict, bool) {
    let a = &r["appendix_identities"];
    let parts: Vec<&Part> = a.parts_named("beta_fit.printed").collect();
    let ratios: Vec<String> = parts.iter().map(|p| format!("{:.3}", p.observed / p.expected)).collect();
    let d = format!("fit / printed = {}; {}", ratios.join(" "), failing(&parts));
    let v = Verdict { pass: all_pass(parts.iter().copied()), detail: d };
    let rest_ok = parts.len() == 3 && parts.iter().all(|p| !p.pass) && all_pass(a.parts_named("beta_fit.doubled"));
    (v, rest_ok)
}

fn run_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ibm-toolkit")).args(args).output().expect("binary runs")
}

fn dir_bytes(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let e = e.unwrap();
        m.insert(e.file_name().to_string_lossy().into(), std::fs::read(e.path()).unwrap());
    }
    m
}

fn criterion_9() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut same = Vec::new();
    // same config, so the same output directory; emptied between runs
    for _ in 0..2 {
        let d = tmp.path().join("run");
        let _ = std::fs::remove_dir_all(&d);
        let v = d.join("verify");
        let s = d.join("sim");
        let c = d.join("cond");
        let rp = d.join("report");
        run_bin(&["verify", "analytic", "lemma_hbta", "--scale", "0.05", "--deterministic", "--out", v.to_str().unwrap()]);
        run_bin(&["sim", "t0_histogram", "--n-paths", "20000", "--out", s.to_str().unwrap()]);
        run_bin(&["sim", "conditioned_paths", "--n-paths", "5", "--format", "json", "--out", c.to_str().unwrap()]);
        run_bin(&[
            "report",
            v.join("appendix_identities.json").to_str().unwrap(),
            v.join("lemma_hbta.json").to_str().unwrap(),
            "--out",
            rp.to_str().unwrap(),
        ]);
        let eval = run_bin(&["eval", "nth_passage_density", "--n", "1,2", "--b", "1", "--t", "2", "--z", "0.2:2:4"]);
        same.push((dir_bytes(&v), dir_bytes(&s), dir_bytes(&c), dir_bytes(&rp), eval.stdout));
    }
    let ok = same[0] == same[1] && same[0].0.len() == 5 && !same[0].4.is_empty();
    Verdict {
        pass: ok,
        detail: if ok { "verify, sim, report and eval outputs byte-identical on rerun".into() } else { "outputs differ".into() },
    }
}

fn main() {
    let cfg = HarnessConfig::default();
    let ids = select(&[]).unwrap();
    let mut reports = BTreeMap::new();
    for (id, r) in run_suite(&ids, &cfg) {
        let r = r.unwrap_or_else(|e| panic!("{id}: {e}"));
        reports.insert(id, r);
    }
    let (v1, ok1) = criterion_1(&reports);
    let v2 = criterion_2(&reports);
    let v3 = criterion_3(&reports);
    let v4 = criterion_4(&reports);
    let v5 = criterion_5(&reports);
    let (v6, ok6) = criterion_6(&reports);
    let v7 = criterion_7(&reports);
    let (v8, ok8) = criterion_8(&reports);
    let v9 = criterion_9();
    for (n, v) in [(1, &v1), (2, &v2), (3, &v3), (4, &v4), (5, &v5), (6, &v6), (7, &v7), (8, &v8), (9, &v9)] {
        line(n, v);
    }
    println!("expected failures: 1 (printed Lebedev constant is 4/3 of the integral), 6 (printed slope is twice the value implied by the tail constants), 8 (printed beta_k is half of the fitted coefficient)");

    for (n, v) in [(2, &v2), (3, &v3), (4, &v4), (5, &v5), (7, &v7), (9, &v9)] {
        assert!(v.pass, "criterion {n} failed: {}", v.detail);
    }
    assert!(!v1.pass && ok1, "criterion 1: only the printed Lebedev constant may fail: {}", v1.detail);
    assert!(!v6.pass && ok6, "criterion 6: only the printed slope may fail: {}", v6.detail);
    assert!(!v8.pass && ok8, "criterion 8: only printed beta_k may fail: {}", v8.detail);
}
