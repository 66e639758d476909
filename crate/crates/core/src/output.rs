//! Plot-ready emission: numeric CSV tables with a header row, and a JSON
//! sidecar holding the resolved configuration and summary values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Format {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "json")]
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Domain(format!("unknown output format `{other}`"))),
        }
    }
}

/// Column-labelled numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Domain(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:e}");
            }
            s.push('\n');
        }
        s
    }

    /// Parse a table written by [`Table::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Domain("empty CSV".into()))?;
        let mut table = Table::new(header.split(','));
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Domain(format!("CSV line {}: {e}", n + 2)))?;
            table.push(row)?;
        }
        Ok(table)
    }

    /// Rows as objects keyed by column name.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(|v| json_number(*v))).collect()))
                .collect(),
        )
    }
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

/// Everything a subcommand emits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    /// Resolved inputs.
    pub config: Value,
    /// Scalar results.
    pub summary: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

impl Report {
    pub fn new(command: &str, config: Value, summary: Value) -> Self {
        Report { command: command.into(), config, summary, table: None }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    fn sidecar(&self) -> Value {
        let mut v = serde_json::json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "summary": self.summary,
        });
        if let Some(t) = &self.table {
            v["columns"] = serde_json::json!(t.columns);
        }
        v
    }

    /// Write the report under `dir` as `<stem>.csv` plus `<stem>.json`
    /// (CSV format) or a single `<stem>.json` holding the rows too.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let json_path = dir.join(format!("{stem}.json"));
        let mut written = Vec::new();
        let mut sidecar = self.sidecar();
        match (format, &self.table) {
            (Format::Csv, Some(table)) => {
                let csv_path = dir.join(format!("{stem}.csv"));
                std::fs::write(&csv_path, table.to_csv())?;
                sidecar["data"] = Value::String(format!("{stem}.csv"));
                written.push(csv_path);
            }
            (Format::Json, Some(table)) => sidecar["rows"] = table.to_json(),
            (_, None) => {}
        }
        std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        written.push(json_path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exactly() {
        let mut t = Table::new(["x", "y"]);
        t.push(vec![0.1, 1e-20]).unwrap();
        t.push(vec![-3.5, 7.0 / 3.0]).unwrap();
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(t, back);
        assert!(t.to_csv().starts_with("x,y\n"));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec![1.0]).is_err());
    }

    #[test]
    fn writes_csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["x"]);
        t.push(vec![1.0]).unwrap();
        let r = Report::new("demo", serde_json::json!({"a": 1}), serde_json::json!({})).with_table(t);
        let files = r.write(dir.path(), "demo", Format::Csv).unwrap();
        assert_eq!(files.len(), 2);
        let side: Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(side["config"]["a"], 1);
        assert_eq!(side["data"], "demo.csv");
    }
}
