//! JSON report envelope and CSV tables.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// Bumped whenever the JSON layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub config: C,
    pub result: R,
    pub warnings: Vec<String>,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: impl Into<String>, config: C, result: R, warnings: Vec<String>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config,
            result,
            warnings,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Writes `content` to `path`, or to standard output when `path` is `-`.
pub fn write_output(path: &Path, content: &str) -> Result<()> {
    if path == Path::new("-") {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(content.as_bytes())
            .map_err(|source| CliError::Output { path: path.to_path_buf(), source });
    }
    std::fs::write(path, content).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

/// A rectangular table of strings, written as CSV or aligned text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: Into<String>>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(Into::into).collect());
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("CSV built from UTF-8 strings"))
    }

    pub fn to_text(&self) -> String {
        let ncol = self.header.len();
        let mut width = vec![0; ncol];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut s = String::new();
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = r.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            s.push_str(cells.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

/// Number formatting for tables.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v:.4}")
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or("NA".into(), num)
}

/// Full-precision formatting for CSV cells.
pub fn raw(v: f64) -> String {
    if v.is_nan() { "NA".into() } else { v.to_string() }
}

pub fn opt_raw(v: Option<f64>) -> String {
    v.map_or("NA".into(), raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_text() {
        let mut t = Table::new(["a", "bb"]);
        t.push(["1", "x,y"]);
        assert_eq!(t.to_csv().unwrap(), "a,bb\n1,\"x,y\"\n");
        assert_eq!(t.to_text(), "a   bb\n1  x,y\n");
    }

    #[test]
    fn envelope_carries_version() {
        let r = Report::new("stats", 1, 2, vec![]);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["command"], "stats");
    }
}
