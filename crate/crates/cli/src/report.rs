//! Report tables and asserted properties of a run.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;
use tci_lab::paths::fmt_f64;

use crate::error::RunError;

/// CSV table with a mandatory header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), RunError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, RunError> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| RunError::Io(e.to_string()))
    }
}

/// Number cell with 17 significant digits.
pub fn num(v: f64) -> String {
    fmt_f64(v)
}

pub fn int(v: usize) -> String {
    v.to_string()
}

pub fn flag(v: bool) -> String {
    v.to_string()
}

/// An asserted property of the run; any failing property gives exit status 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Property {
    pub name: String,
    pub holds: bool,
    pub detail: Value,
}

/// Result of one experiment: the main report, optional auxiliary tables
/// written next to it as `<prefix>.<suffix>.csv`, asserted properties and
/// unasserted measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Table,
    pub extra: Vec<(&'static str, Table)>,
    pub properties: Vec<Property>,
    pub measurements: serde_json::Map<String, Value>,
}

impl Outcome {
    pub fn new(report: Table) -> Self {
        Self {
            report,
            extra: Vec::new(),
            properties: Vec::new(),
            measurements: serde_json::Map::new(),
        }
    }

    pub fn assert(&mut self, name: &str, holds: bool, detail: impl Serialize) {
        self.properties.push(Property {
            name: name.to_string(),
            holds,
            detail: serde_json::to_value(detail).unwrap_or(Value::Null),
        });
    }

    pub fn measure(&mut self, name: &str, value: impl Serialize) {
        self.measurements.insert(
            name.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    pub fn attach(&mut self, suffix: &'static str, table: Table) {
        self.extra.push((suffix, table));
    }

    pub fn holds(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// Header of the generic inequality report.
pub const CHECK_HEADER: [&str; 6] = ["experiment", "param", "lhs", "rhs", "holds", "gap"];

/// Header of tail and concentration reports.
pub const TAIL_HEADER: [&str; 7] = ["experiment", "n", "trial_count", "median", "sigma2_fit", "r2", "verdict"];

/// Row of the generic report; `gap = rhs - lhs`.
pub fn check_row(experiment: &str, param: String, lhs: f64, rhs: f64, holds: bool) -> Vec<String> {
    vec![experiment.to_string(), param, num(lhs), num(rhs), flag(holds), num(rhs - lhs)]
}
