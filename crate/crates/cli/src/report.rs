//! Table output: a CSV file with a `#` metadata header and a JSON mirror.
//!
//! The `# generated_unix:` line and the JSON `generated_unix` field carry the
//! wall-clock time; everything else is a pure function of the config.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

pub const TIMESTAMP_PREFIX: &str = "# generated_unix:";

pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// A float cell; non-finite values become the strings "inf", "-inf", "nan".
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`. `summary` goes into the
/// JSON only.
pub fn write_table<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    table: &Table,
    summary: Value,
) -> Result<(), CliError> {
    let config_json = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
    let stamp = unix_now();

    let csv_path = dir.join(format!("{}.csv", table.name));
    let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# kenv {command} {}", env!("CARGO_PKG_VERSION"))
        .and_then(|_| writeln!(out, "{TIMESTAMP_PREFIX} {stamp}"))
        .and_then(|_| writeln!(out, "# config: {config_json}"))
        .map_err(|e| io_err(&csv_path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)
        .map_err(|e| io_err(&csv_path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell_text))
            .map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;

    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            let obj: Map<String, Value> = table
                .columns
                .iter()
                .cloned()
                .zip(r.iter().cloned())
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "generated_unix": stamp,
        "config": serde_json::from_str::<Value>(&config_json).unwrap_or(Value::Null),
        "summary": summary,
        "columns": table.columns,
        "rows": rows,
    });
    let json_path = dir.join(format!("{}.json", table.name));
    let file = File::create(&json_path).map_err(|e| io_err(&json_path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| io_err(&json_path, e))?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|e| io_err(&json_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![num(1.5), json!("x,y")]);
        t.push(vec![num(f64::NEG_INFINITY), Value::Null]);
        write_table(
            dir.path(),
            "demo",
            &json!({"k": 1}),
            &t,
            json!({"passed": true}),
        )
        .unwrap();
        let csv = std::fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["a,b", "1.5,\"x,y\"", "-inf,"]);
        assert!(csv.lines().any(|l| l.starts_with(TIMESTAMP_PREFIX)));
        let doc: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo.json")).unwrap())
                .unwrap();
        assert_eq!(doc["rows"][0]["b"], "x,y");
        assert_eq!(doc["summary"]["passed"], true);
    }
}
