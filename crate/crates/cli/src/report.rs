//! JSON report and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Pass/fail outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub description: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: &str, description: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    /// Passes when `value` is finite and `flag` holds.
    pub fn holds(name: &str, description: &str, value: f64, threshold: f64, flag: bool) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            value,
            threshold,
            pass: flag && value.is_finite(),
        }
    }
}

/// A reported number together with the change `--verify` may cause.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    /// Allowed `|base - refined| / max(1, |base|)`.
    pub verify_tol: f64,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: f64, verify_tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            verify_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub name: String,
    pub base: f64,
    pub refined: f64,
    pub deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub pass: bool,
    pub rows: Vec<VerifyRow>,
}

impl Verification {
    pub fn compare(base: &[Metric], refined: &[Metric]) -> Self {
        let rows: Vec<VerifyRow> = base
            .iter()
            .map(|b| {
                let r = refined.iter().find(|r| r.name == b.name);
                let refined = r.map_or(f64::NAN, |r| r.value);
                let deviation = (b.value - refined).abs() / b.value.abs().max(1.0);
                VerifyRow {
                    name: b.name.clone(),
                    base: b.value,
                    refined,
                    deviation,
                    tol: b.verify_tol,
                    pass: deviation <= b.verify_tol,
                }
            })
            .collect();
        Self {
            pass: rows.iter().all(|r| r.pass),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub kind: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
    pub metrics: Vec<Metric>,
    pub details: serde_json::Value,
    pub verify: Option<Verification>,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.name == name)
            .map(|m| m.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: Vec<String>) -> Self {
        Self {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Floats in scientific notation with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match c {
                    Cell::Int(v) => write!(s, "{v}").unwrap(),
                    Cell::Float(v) => write!(s, "{v:.16e}").unwrap(),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path, prefix: &str) -> Result<()> {
        let path = dir.join(format!("{prefix}_{}.csv", self.name));
        std::fs::write(&path, self.to_csv()).with_context(|| format!("writing {}", path.display()))
    }
}

/// Column names `base_0, base_1, ...` for an `m`-vector.
pub fn columns(base: &str, m: usize) -> Vec<String> {
    if m == 1 {
        vec![base.to_string()]
    } else {
        (0..m).map(|i| format!("{base}_{i}")).collect()
    }
}

pub fn header(parts: &[&[String]]) -> Vec<String> {
    parts.iter().flat_map(|p| p.iter().cloned()).collect()
}

pub fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

pub fn floats(v: &[f64]) -> Vec<Cell> {
    v.iter().map(|&x| Cell::Float(x)).collect()
}
