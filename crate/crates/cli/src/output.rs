//! Tabular reports rendered as commented CSV or a single JSON document.

use std::io::Write;

use qpurify::control::MinTime;
use qpurify::trajectory::fmt_float;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};

/// One table entry. Non-finite numbers never reach the output: they are
/// turned into the label `non-finite`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Label(String),
}

impl Cell {
    pub fn num(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Label("non-finite".into())
        }
    }

    pub fn label(s: impl Into<String>) -> Self {
        Cell::Label(s.into())
    }

    pub fn min_time(t: &MinTime, scale: f64) -> Self {
        match t.value() {
            Some(v) => Cell::num(v / scale),
            None => Cell::label("divergent"),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Label(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Label(s) => json!(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Cell::Label(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: RunConfig,
    /// Scalar results and reference values, echoed as `#` lines in CSV.
    pub metadata: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, columns: &[&str]) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            metadata: Map::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl serde::Serialize) {
        self.metadata
            .insert(key.into(), serde_json::to_value(value).expect("metadata serializes"));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# qpurify {} {}", env!("CARGO_PKG_VERSION"), self.command)?;
        for line in self.config.echo().lines() {
            if line.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "# {line}")?;
            }
        }
        for (k, v) in &self.metadata {
            writeln!(w, "# meta.{k} = {v}")?;
        }
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                Value::Object(obj)
            })
            .collect();
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": rows,
        })
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => {
                let mut buf = Vec::new();
                self.write_csv(&mut buf).expect("writing to memory");
                buf
            }
            Format::Json => {
                let mut text = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
                text.push('\n');
                text.into_bytes()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("scan-gamma", &RunConfig::default(), &["a", "b"]);
        r.meta("note", 1.5);
        r.push(vec![Cell::num(0.25), Cell::label("divergent")]);
        r.push(vec![Cell::num(f64::NAN), Cell::Int(3)]);
        r
    }

    #[test]
    fn csv_has_echo_header_and_no_nan() {
        let text = String::from_utf8(sample().render(Format::Csv)).unwrap();
        assert!(text.starts_with("# qpurify "));
        assert!(text.contains("# meta.note = 1.5"));
        assert!(text.contains("# horizon = 20.0"));
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["a,b", "2.5000000000000000e-1,divergent", "non-finite,3"]);
        assert!(!body.iter().any(|l| l.contains("NaN") || l.contains("inf")));
    }

    #[test]
    fn json_rows_are_keyed_by_column() {
        let v = sample().to_json();
        assert_eq!(v["rows"][0]["a"], 0.25);
        assert_eq!(v["rows"][0]["b"], "divergent");
        assert_eq!(v["metadata"]["note"], 1.5);
        assert_eq!(v["config"]["horizon"], 20.0);
    }
}
