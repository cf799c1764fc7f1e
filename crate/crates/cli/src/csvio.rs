//! Minimal CSV writing/reading for the experiment outputs: header row,
//! UTF-8, '.' decimal, no quoting (fields never contain commas).

use std::path::Path;

use anyhow::{Context, Result};

pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.header.len(), "row width must match header");
        self.rows.push(fields.to_vec());
    }

    pub fn push_values(&mut self, fields: &[f64]) {
        self.push_row(&fields.iter().map(|v| format_f64(*v)).collect::<Vec<_>>());
    }

    pub fn to_string(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path) -> Result<CsvTable> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .context("empty CSV")?
            .split(',')
            .map(|s| s.to_string())
            .collect();
        let rows = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(|s| s.to_string()).collect())
            .collect();
        Ok(CsvTable { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name).with_context(|| format!("no column {name}"))?;
        self.rows
            .iter()
            .map(|r| r[idx].parse::<f64>().with_context(|| format!("bad number {}", r[idx])))
            .collect()
    }
}

/// Shortest round-trip decimal form.
pub fn format_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
