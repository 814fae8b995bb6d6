use std::io::Write;

use serde_json::{json, Value};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // shortest round-trip form
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => Value::String(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let ioe = |e: csv::Error| CliError::Failure(format!("csv: {e}"));
                w.write_record(&self.columns).map_err(ioe)?;
                for r in &self.rows {
                    w.write_record(r.iter().map(Cell::csv)).map_err(ioe)?;
                }
                w.into_inner().map_err(|e| CliError::Failure(format!("csv: {e}")))
            }
            Format::Json => {
                let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
                let mut out = serde_json::to_vec_pretty(&json!({ "columns": self.columns, "rows": rows }))
                    .map_err(|e| CliError::Failure(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }

    /// Writes to `path`, or to stdout when `path` is None.
    pub fn emit(&self, format: Format, path: Option<&std::path::Path>) -> Result<(), CliError> {
        let bytes = self.render(format)?;
        match path {
            Some(p) => write_file(p, &bytes),
            None => std::io::stdout().write_all(&bytes).map_err(|e| CliError::Failure(format!("stdout: {e}"))),
        }
    }
}

pub fn write_file(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("creating {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Failure(format!("writing {}: {e}", path.display())))
}
