//! Text output helpers. Every number written by the simulator goes through
//! [`sig12`], which is locale independent and keeps 12 significant digits.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Scientific notation with 12 significant digits.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    sig12(x).parse().expect("formatted float parses")
}

/// Writes `rows` under a header line, each value formatted with [`sig12`].
pub fn write_table(mut out: impl Write, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| sig12(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Writes a table to `path`.
pub fn write_table_file(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_table(&mut w, header, rows).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Flat JSON object of named numbers, each rounded to 12 significant digits.
pub fn flat_json(fields: &[(&str, f64)]) -> String {
    let map: serde_json::Map<String, serde_json::Value> = fields
        .iter()
        .map(|&(k, v)| (k.to_string(), serde_json::json!(round12(v))))
        .collect();
    serde_json::to_string_pretty(&map).expect("numbers serialise")
}
