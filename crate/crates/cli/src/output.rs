use std::io::Write;

use hardy_core::Result;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};

/// A rectangular result; cells are already formatted.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Serialize)]
pub struct Repro {
    pub config_hash: String,
    pub cfg_fingerprint: String,
    pub version: &'static str,
}

impl Repro {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            config_hash: format!("{:016x}", cfg.hash()),
            cfg_fingerprint: format!("{:016x}", cfg.eval.fingerprint()),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

/// Writes the table. CSV goes to stdout with the reproducibility block on
/// stderr; JSON carries both in one document.
pub fn emit(
    format: Format,
    command: &str,
    table: &Table,
    extra: Option<Value>,
    repro: &Repro,
    out: &mut impl Write,
    err: &mut impl Write,
) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.headers)?;
            for r in &table.rows {
                w.write_record(r)?;
            }
            let bytes = w.into_inner().map_err(|e| hardy_core::Error::Io(e.into_error()))?;
            out.write_all(&bytes)?;
            writeln!(
                err,
                "# config_hash={} cfg_fingerprint={} version={}",
                repro.config_hash, repro.cfg_fingerprint, repro.version
            )?;
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> =
                        table.headers.iter().cloned().zip(r.iter().map(|c| cell_value(c))).collect();
                    Value::Object(m)
                })
                .collect();
            let mut doc = json!({ "command": command, "reproducibility": repro, "rows": rows });
            if let Some(x) = extra {
                doc["detail"] = x;
            }
            serde_json::to_writer_pretty(&mut *out, &doc)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn cell_value(c: &str) -> Value {
    if c.is_empty() {
        return Value::Null;
    }
    match c.parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        _ => Value::String(c.to_string()),
    }
}
