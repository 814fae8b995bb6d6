use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ibm_toolkit::verify_harness::{rollup_csv, CheckReport, Part};

use crate::config::RunConfig;
use crate::table::{write_file, Cell, Table};
use crate::CliError;

pub fn load(path: &Path) -> Result<CheckReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read report {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not a check report: {e}", path.display())))
}

/// Name of the series a part belongs to: the part name without a trailing `.key=value`.
pub fn series_name(p: &Part) -> &str {
    let Some(eq) = p.name.rfind('=') else { return &p.name };
    match p.name[..eq].rfind('.') {
        Some(dot) => &p.name[..dot],
        None => &p.name,
    }
}

pub fn series_table(r: &CheckReport) -> Option<Table> {
    let mut t = Table::new(&["series", "t", "observed", "expected", "stderr", "pass", "gating"]);
    for p in r.parts.iter().filter(|p| p.at.is_some()) {
        t.push(vec![
            Cell::Text(series_name(p).to_string()),
            Cell::Num(p.at.unwrap_or(f64::NAN)),
            Cell::Num(p.observed),
            Cell::Num(p.expected),
            Cell::Num(p.stderr.unwrap_or(f64::NAN)),
            Cell::Text(p.pass.to_string()),
            Cell::Text(p.gating.to_string()),
        ]);
    }
    (!t.rows.is_empty()).then_some(t)
}

/// Merges reports by check id (a later file replaces an earlier one) and writes
/// `summary.csv` plus `<check_id>.series.csv` for every report with series parts.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.check_keys(&["inputs"])?;
    let inputs = cfg.strings("inputs")?;
    if inputs.is_empty() {
        return Err(CliError::Usage("report needs at least one input file".into()));
    }
    let mut merged: BTreeMap<String, CheckReport> = BTreeMap::new();
    for i in &inputs {
        let r = load(Path::new(i))?;
        merged.insert(r.check_id.clone(), r);
    }
    let reports: Vec<CheckReport> = merged.into_values().collect();
    let dir = PathBuf::from(cfg.output_path.clone().unwrap_or_else(|| "report_out".into()));
    let mut written = Vec::new();
    let summary = dir.join("summary.csv");
    write_file(&summary, rollup_csv(&reports).as_bytes())?;
    written.push(summary);
    for r in &reports {
        if let Some(t) = series_table(r) {
            let p = dir.join(format!("{}.series.{}", r.check_id, cfg.format.ext()));
            write_file(&p, &t.render(cfg.format)?)?;
            written.push(p);
        }
    }
    Ok(written)
}
