//! CSV layout shared by the study output and the plotter.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::stepper::Variant;

pub const STEP_COLUMN: &str = "Stepsize";

/// One row per step size, largest first, six significant digits.
pub fn write_csv(hs: &[f64], errors: &[[f64; 6]]) -> String {
    let mut out = String::from(STEP_COLUMN);
    for v in Variant::ALL {
        out.push(',');
        out.push_str(v.label());
    }
    out.push('\n');
    for (h, row) in hs.iter().zip(errors) {
        let _ = write!(out, "{h:.5e}");
        for e in row {
            let _ = write!(out, ",{e:.5e}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    /// `(step, values)` in file order.
    pub rows: Vec<(f64, Vec<f64>)>,
}

/// Parses a study CSV. The header must start with `Stepsize`; every row
/// must have one positive value per column.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Malformed("line 1: missing header".into()))?;
    let mut fields = header.split(',').map(str::trim);
    if fields.next() != Some(STEP_COLUMN) {
        return Err(Error::Malformed(format!(
            "line 1: header must start with '{STEP_COLUMN}'"
        )));
    }
    let columns: Vec<String> = fields.map(String::from).collect();
    if columns.is_empty() || columns.iter().any(String::is_empty) {
        return Err(Error::Malformed("line 1: header has no data columns".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let number = i + 1;
        let values = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Malformed(format!("line {number}: '{}' is not a number", f.trim())))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != columns.len() + 1 {
            return Err(Error::Malformed(format!(
                "line {number}: expected {} fields, found {}",
                columns.len() + 1,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Malformed(format!(
                "line {number}: value {bad} is not positive"
            )));
        }
        rows.push((values[0], values[1..].to_vec()));
    }
    if rows.is_empty() {
        return Err(Error::Malformed("no data rows".into()));
    }
    Ok(CsvTable { columns, rows })
}
