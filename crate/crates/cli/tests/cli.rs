use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ibm-toolkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

// Last column of the only data row.
fn single_value(o: &Output) -> f64 {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
    let s = stdout(o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines.len(), 2, "{s}");
    lines[1].rsplit(',').next().unwrap().parse().unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn eval_examples() {
    let h = single_value(&run(&["eval", "h", "--x", "1", "--y", "0"]));
    assert!((h - 0.6183916885668086).abs() < 1e-12);
    assert!((h - 0.61838).abs() < 2e-5);
    assert_eq!(single_value(&run(&["eval", "h", "--x", "0", "--y", "4"])), 2.0);
    let s = single_value(&run(&["eval", "survival", "--t", "1e4", "--x", "1", "--y", "0"]));
    assert!((s - 0.0718238478).abs() < 1e-9);
    let d = single_value(&run(&["eval", "drift", "--x", "1", "--y", "-0.5"]));
    assert!(d.is_finite() && d > 0.0);
}

#[test]
fn eval_prints_seventeen_digits() {
    let o = run(&["eval", "h", "--x", "1", "--y", "0"]);
    let s = stdout(&o);
    let v = s.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    let mantissa = v.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{v}");
    assert_eq!(format!("{:.16e}", v.parse::<f64>().unwrap()), v);
}

#[test]
fn eval_grid_and_json() {
    let o = run(&["eval", "h", "--x", "0.5,1,2", "--y", "-1:1:5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1 + 15);
    let o = run(&["eval", "h", "--x", "1,2", "--y", "0", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["columns"], serde_json::json!(["x", "y", "h"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["rows"][0][2].as_f64().unwrap(), 0.618391688566809);
}

#[test]
fn eval_with_weight() {
    let o = run(&["eval", "phi_caps", "--x", "1", "--y", "0", "--phi", "0:1,1:0.5,2:0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    std::fs::write(&w, r#"{"breakpoints": [[0.0, 1.0], [1.0, 0.5], [2.0, 0.0]], "support_end": 2.0}"#).unwrap();
    let o2 = run(&["eval", "phi_caps", "--x", "1", "--y", "0", "--phi", w.to_str().unwrap()]);
    assert_eq!(o.stdout, o2.stdout);
    assert_eq!(run(&["eval", "phi_caps", "--x", "1", "--y", "0"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "phi_caps", "--x", "1", "--y", "0", "--phi", "0:1,1:x"]).status.code(), Some(2));
}

#[test]
fn eval_usage_errors() {
    let o = run(&["eval", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown target") && stderr(&o).contains("nth_passage_density"));
    let o = run(&["eval", "h", "--x", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad arity"));
    assert_eq!(run(&["eval", "h", "--x", "1", "--y", "0", "--t", "1"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "h", "--x", "abc", "--y", "0"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "p_t", "--t", "-1", "--x", "0", "--y", "0", "--u", "0", "--v", "0"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "i_k", "--k", "1.5", "--a", "1"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn config_file_replays_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["eval", "nth_passage_density", "--n", "2", "--b", "1", "--t", "3", "--z", "0.5,1"];
    let direct = run(&args);
    let mut with_print = args.to_vec();
    with_print.push("--print-config");
    let cfg_text = stdout(&run(&with_print));
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, &cfg_text).unwrap();
    let replay = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(direct.stdout, replay.stdout);
    let v: serde_json::Value = serde_json::from_str(&cfg_text).unwrap();
    assert_eq!(v["params"]["z"], serde_json::json!([0.5, 1.0]));
    assert_eq!(v["command"], "eval");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"command": "eval", "params": {"target": "h", "x": 1, "y": 0}, "colour": 1}"#).unwrap();
    let o = run(&["--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
    std::fs::write(&bad, r#"{"command": "eval", "params": {"target": "h", "x": 1, "y": 0, "q": 2}}"#).unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["--config", "/nonexistent/run.json"]).status.code(), Some(2));
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "eval", "h"]).status.code(), Some(2));
}

#[test]
fn sim_histogram_rows_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let base = ["sim", "t0_histogram", "--n-paths", "4000", "--set", "bins=7", "--set", "t_max=5"];
    let mut args_a = base.to_vec();
    args_a.extend(["--out", a.to_str().unwrap()]);
    assert_eq!(run(&args_a).status.code(), Some(0));
    let mut args_b = base.to_vec();
    args_b.extend(["--out", b.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(run(&args_b).status.code(), Some(0));
    let rows = data_rows(&a.join("t0_histogram.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(std::fs::read(a.join("t0_histogram.csv")).unwrap(), std::fs::read(b.join("t0_histogram.csv")).unwrap());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["params"]["bins"], 7);
    assert_eq!(meta["config_digest"].as_str().unwrap().len(), 64);

    // the recorded config replays to the same bytes
    let replay_dir = dir.path().join("c");
    let mut cfg = meta["config"].clone();
    cfg["output_path"] = serde_json::json!(replay_dir.to_str().unwrap());
    let cfg_path = dir.path().join("replay.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    assert_eq!(run(&["--config", cfg_path.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.join("t0_histogram.csv")).unwrap(),
        std::fs::read(replay_dir.join("t0_histogram.csv")).unwrap()
    );

    let other = dir.path().join("d");
    let mut args_c = base.to_vec();
    args_c.extend(["--out", other.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(run(&args_c).status.code(), Some(0));
    assert_ne!(std::fs::read(a.join("t0_histogram.csv")).unwrap(), std::fs::read(other.join("t0_histogram.csv")).unwrap());
}

#[test]
fn sim_threads_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e");
    let o = bin()
        .args(["sim", "survival", "--n-paths", "2000", "--times", "1,2", "--out", out.to_str().unwrap()])
        .env("IBM_TOOLKIT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(data_rows(&out.join("survival.csv")).len(), 2);
    let o = bin().args(["eval", "h", "--x", "1", "--y", "0"]).env("IBM_TOOLKIT_THREADS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn conditioned_paths_stay_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = run(&[
        "sim",
        "conditioned_paths",
        "--x",
        "0.2",
        "--y",
        "-1",
        "--n-paths",
        "40",
        "--set",
        "horizon=5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = data_rows(&out.join("conditioned_paths.csv"));
    assert_eq!(rows.len(), 40 * 51);
    for r in &rows {
        let x: f64 = r[2].parse().unwrap();
        assert!(x > 0.0, "sample {r:?}");
    }
}

#[test]
fn sim_usage_errors() {
    assert_eq!(run(&["sim", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["sim", "t0_histogram", "--set", "bogus=1"]).status.code(), Some(2));
    assert_eq!(run(&["sim", "t0_histogram", "--set", "bins"]).status.code(), Some(2));
    assert_eq!(run(&["sim", "t0_histogram", "--set", "bins=0"]).status.code(), Some(2));
    assert_eq!(run(&["sim", "conditioned_paths", "--x", "-1"]).status.code(), Some(2));
}

#[test]
fn verify_exit_codes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = run(&["verify", "harmonicity", "transition_identities", "--deterministic", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("harmonicity.json").exists() && out.join("summary.csv").exists());
    // failing appendix check: exit 1, reports still written
    let out2 = dir.path().join("r2");
    let o = run(&["verify", "appendix_identities", "--out", out2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL appendix_identities"));
    assert!(out2.join("appendix_identities.json").exists());
    let o = run(&["verify", "nope", "--out", dir.path().join("r3").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["verify", "harmonicity", "--scale", "-1"]).status.code(), Some(2));
    let list = stdout(&run(&["verify", "--list"]));
    assert_eq!(list.lines().count(), 10);
}

#[test]
fn report_merges_and_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r");
    run(&["verify", "analytic", "--deterministic", "--out", r.to_str().unwrap()]);
    let h = r.join("harmonicity.json");
    let a = r.join("appendix_identities.json");
    let m1 = dir.path().join("m1");
    let o = run(&["report", h.to_str().unwrap(), a.to_str().unwrap(), "--out", m1.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(data_rows(&m1.join("summary.csv")).len(), 2);
    let series = data_rows(&m1.join("appendix_identities.series.csv"));
    assert!(series.iter().any(|s| s[0] == "lebedev.corrected" && s[1].starts_with("1.0")));
    assert!(series.iter().any(|s| s[0] == "beta_fit.doubled"));

    // repeated and reordered inputs give the same files
    let m2 = dir.path().join("m2");
    let o = run(&["report", a.to_str().unwrap(), h.to_str().unwrap(), h.to_str().unwrap(), "--out", m2.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["summary.csv", "appendix_identities.series.csv"] {
        assert_eq!(std::fs::read(m1.join(f)).unwrap(), std::fs::read(m2.join(f)).unwrap());
    }
    // the merged summary equals the one written by verify for the same checks
    let verify_rows = data_rows(&r.join("summary.csv"));
    let merged = data_rows(&m1.join("summary.csv"));
    assert!(merged.iter().all(|row| verify_rows.contains(row)));

    let missing = dir.path().join("missing.json");
    let o = run(&["report", h.to_str().unwrap(), missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"));
    std::fs::write(dir.path().join("junk.json"), "{}").unwrap();
    assert_eq!(run(&["report", dir.path().join("junk.json").to_str().unwrap()]).status.code(), Some(2));
}
