//! `ibm-toolkit`: evaluate formulas, run simulations and verification suites, merge reports.
//!
//! Exit codes: 0 success, 1 failed check or runtime failure, 2 usage or config error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod eval;
mod report;
mod sim;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use ibm_toolkit::verify_harness::{run_suite, select, write_reports, HarnessConfig};

use config::{numbers_value, parse_list, Command, Format, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn from_lib(e: ibm_toolkit::Error) -> Self {
        match e {
            ibm_toolkit::Error::Domain(_) | ibm_toolkit::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "ibm-toolkit", version, about = "Integrated Brownian motion: formulas, simulation, verification")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, env = "IBM_TOOLKIT_THREADS", global = true)]
    threads: Option<usize>,
    /// Run a saved JSON run config instead of a subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (eval) or directory (sim, verify, report).
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Print the run config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Cmd {
    /// Evaluate a formula over a grid of arguments.
    Eval(EvalArgs),
    /// Run a Monte Carlo scenario and write its table.
    Sim(SimArgs),
    /// Run verification checks; exit 0 iff all pass.
    Verify(VerifyArgs),
    /// Merge JSON check reports into a summary and series files.
    Report(ReportArgs),
}

/// Numeric arguments take "v", "v1,v2,..." or "lo:hi:n".
#[derive(Args)]
struct EvalArgs {
    /// Formula name; omit to list them.
    target: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    u: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    v: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    g: Option<String>,
    /// Penalty weight: "z0:v0,z1:v1,..." or a JSON weight file.
    #[arg(long)]
    phi: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimArgs {
    /// Scenario name; omit to list them.
    scenario: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    #[arg(long)]
    n_paths: Option<u64>,
    /// Observation times: "t1,t2,..." or "lo:hi:n".
    #[arg(long)]
    times: Option<String>,
    /// Any other scenario parameter, as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check ids, or `analytic` / `stochastic`; none runs the full suite.
    checks: Vec<String>,
    /// Multiplies every path count.
    #[arg(long)]
    scale: Option<f64>,
    /// Report runtimes as 0 so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
    /// List check ids and exit.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON check reports.
    #[arg(required = true)]
    inputs: Vec<String>,
    #[command(flatten)]
    common: Common,
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.output_path = c.out.clone();
    if let Some(f) = c.format {
        cfg.format = f;
    }
}

fn set_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    match parse_list("set", raw) {
        Ok(v) => numbers_value(&v),
        Err(_) => Value::String(raw.to_string()),
    }
}

// Turns a subcommand into its run config; Ok(None) means a listing was printed.
fn build(cmd: Cmd) -> Result<Option<(RunConfig, bool)>, CliError> {
    match cmd {
        Cmd::Eval(a) => {
            let Some(target) = a.target else {
                print!("{}", eval::usage_list());
                return Ok(None);
            };
            let mut cfg = RunConfig::new(Command::Eval);
            cfg.params.insert("target".into(), Value::String(target));
            let nums = [
                ("x", &a.x),
                ("y", &a.y),
                ("t", &a.t),
                ("u", &a.u),
                ("v", &a.v),
                ("s", &a.s),
                ("n", &a.n),
                ("b", &a.b),
                ("z", &a.z),
                ("w", &a.w),
                ("a", &a.a),
                ("c", &a.c),
                ("k", &a.k),
                ("g", &a.g),
            ];
            for (k, v) in nums {
                if let Some(s) = v {
                    cfg.params.insert(k.into(), numbers_value(&parse_list(k, s)?));
                }
            }
            if let Some(p) = a.phi {
                cfg.params.insert("phi".into(), Value::String(p));
            }
            apply_common(&mut cfg, &a.common);
            Ok(Some((cfg, a.common.print_config)))
        }
        Cmd::Sim(a) => {
            let Some(scenario) = a.scenario else {
                print!("{}", sim::usage_list());
                return Ok(None);
            };
            let mut cfg = RunConfig::new(Command::Sim);
            cfg.params.insert("scenario".into(), Value::String(scenario));
            if let Some(x) = a.x {
                cfg.params.insert("x".into(), x.into());
            }
            if let Some(y) = a.y {
                cfg.params.insert("y".into(), y.into());
            }
            if let Some(n) = a.n_paths {
                cfg.params.insert("n_paths".into(), n.into());
            }
            if let Some(t) = a.times {
                cfg.params.insert("times".into(), Value::from(parse_list("times", &t)?));
            }
            for kv in &a.set {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
                cfg.params.insert(k.trim().to_string(), set_value(v.trim()));
            }
            apply_common(&mut cfg, &a.common);
            Ok(Some((cfg, a.common.print_config)))
        }
        Cmd::Verify(a) => {
            if a.list {
                for id in select(&[]).map_err(CliError::from_lib)? {
                    println!("{id}");
                }
                return Ok(None);
            }
            let mut cfg = RunConfig::new(Command::Verify);
            cfg.params.insert("checks".into(), Value::from(a.checks));
            if let Some(s) = a.scale {
                cfg.params.insert("scale".into(), s.into());
            }
            if a.deterministic {
                cfg.params.insert("deterministic".into(), true.into());
            }
            apply_common(&mut cfg, &a.common);
            Ok(Some((cfg, a.common.print_config)))
        }
        Cmd::Report(a) => {
            let mut cfg = RunConfig::new(Command::Report);
            cfg.params.insert("inputs".into(), Value::from(a.inputs));
            apply_common(&mut cfg, &a.common);
            Ok(Some((cfg, a.common.print_config)))
        }
    }
}

fn verify(cfg: &RunConfig) -> Result<bool, CliError> {
    cfg.check_keys(&["checks", "scale", "deterministic"])?;
    let ids = select(&cfg.strings("checks")?).map_err(CliError::from_lib)?;
    let scale = cfg.number("scale")?.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CliError::Usage(format!("scale must be positive, got {scale}")));
    }
    let hc = HarnessConfig { seed: cfg.seed, scale, deterministic: cfg.flag("deterministic")? };
    let dir = PathBuf::from(cfg.output_path.clone().unwrap_or_else(|| "reports".into()));
    let mut reports = Vec::new();
    let mut ok = true;
    for (id, r) in run_suite(&ids, &hc) {
        match r {
            Ok(rep) => {
                println!("{} {id} ({:.1} s)", if rep.pass { "PASS" } else { "FAIL" }, rep.runtime_s);
                for p in rep.parts.iter().filter(|p| p.gating && !p.pass) {
                    println!("    failed part {}: observed {:.16e}, expected {:.16e}, rule {}", p.name, p.observed, p.expected, p.rule);
                }
                ok &= rep.pass;
                reports.push(rep);
            }
            Err(e) => {
                println!("ERROR {id}: {e}");
                ok = false;
            }
        }
    }
    write_reports(&dir, &reports).map_err(|e| CliError::Failure(e.to_string()))?;
    Ok(ok)
}

fn execute(cfg: &RunConfig) -> Result<bool, CliError> {
    match cfg.command {
        Command::Eval => {
            let t = eval::run(cfg)?;
            t.emit(cfg.format, cfg.output_path.as_deref().map(std::path::Path::new))?;
            Ok(true)
        }
        Command::Sim => {
            for p in sim::run(cfg)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Verify => verify(cfg),
        Command::Report => {
            for p in report::run(cfg)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn real_main() -> Result<bool, CliError> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
    }
    let cfg = match (cli.config, cli.cmd) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--config cannot be combined with a subcommand".into())),
        (Some(path), None) => RunConfig::load(&path)?,
        (None, Some(cmd)) => match build(cmd)? {
            None => return Ok(true),
            Some((cfg, true)) => {
                print!("{}", cfg.to_json());
                return Ok(true);
            }
            Some((cfg, false)) => cfg,
        },
        (None, None) => return Err(CliError::Usage("no command given; see --help".into())),
    };
    execute(&cfg)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
