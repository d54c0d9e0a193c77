//! Minimal CSV writing with deterministic float formatting.

use crate::{Error, Result};
use std::path::Path;

/// Fixed six-decimal formatting keeps output bytes stable across runs.
pub fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// High-precision formatting for verification reports.
pub fn fmt_precise(v: f64) -> String {
    format!("{v:.12}")
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvTable {
    pub fn new(header: &str) -> Self {
        Self { header: header.to_string(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn to_string(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 32 + self.header.len() + 1);
        out.push_str(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_string()).map_err(Error::from)
    }
}

/// Reads a simple CSV (no quoting) into header + string cells.
pub fn read_csv(path: &Path) -> Result<(String, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Io(format!("{}: empty csv", path.display())))?
        .to_string();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect();
    Ok((header, rows))
}
