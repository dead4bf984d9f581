//! Result tables and their CSV and JSON encodings.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

/// A table cell. Label columns hold text, every other cell a finite real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// Rectangular table with run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultTable {
    pub meta: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            meta: Map::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<Value>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), CliError> {
        if row.len() != self.columns.len() {
            return Err(CliError::Numeric(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (cell, name) in row.iter().zip(&self.columns) {
            if let Cell::Num(v) = cell {
                if !v.is_finite() {
                    return Err(CliError::Numeric(format!(
                        "non-finite value in column '{name}' of row {}",
                        self.rows.len()
                    )));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_numbers(&mut self, row: &[f64]) -> Result<(), CliError> {
        self.push(row.iter().map(|&v| Cell::Num(v)).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| match c {
                Cell::Num(v) => format!("{v:.16e}"),
                Cell::Text(s) => s.clone(),
            }))
            .map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn to_json(&self) -> Result<Vec<u8>, CliError> {
        let mut out = serde_json::to_vec_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, CliError> {
        serde_json::from_slice(bytes).map_err(|e| CliError::Io(format!("malformed table: {e}")))
    }

    pub fn encode(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn emit(&self, format: Format, path: Option<&std::path::Path>) -> Result<(), CliError> {
        let bytes = self.encode(format)?;
        match path {
            Some(p) => std::fs::write(p, bytes)
                .map_err(|e| CliError::Io(format!("cannot write '{}': {e}", p.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(&bytes)
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
            }
        }
    }
}
