//! Deterministic CSV and JSON writers for tabular data files.
//!
//! Floats are written as `{:.16e}` in CSV (17 significant digits, so values
//! round-trip exactly); JSON uses shortest-round-trip formatting. Neither
//! format embeds timestamps, so identical runs produce identical bytes.

use std::io;
use std::path::Path;

use ndarray::Array2;
use serde_json::{json, Value};

use crate::config::OutputFormat;

pub enum Cell {
    U(u64),
    F(f64),
}

impl Cell {
    fn csv(&self) -> String {
        match *self {
            Cell::U(v) => v.to_string(),
            Cell::F(x) => format!("{x:.16e}"),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::U(v) => Value::from(v),
            Cell::F(x) => serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number),
        }
    }
}

/// Writes `stem.csv` or `stem.json` under `dir`; returns the file name.
pub fn write_table(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    columns: &[String],
    rows: &[Vec<Cell>],
) -> io::Result<String> {
    let (name, bytes) = match format {
        OutputFormat::Csv => {
            let mut text = columns.join(",");
            text.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            (format!("{stem}.csv"), text.into_bytes())
        }
        OutputFormat::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|row| Value::Array(row.iter().map(Cell::json).collect()))
                .collect();
            let doc = json!({ "columns": columns, "rows": rows });
            let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
            text.push('\n');
            (format!("{stem}.json"), text.into_bytes())
        }
    };
    std::fs::write(dir.join(&name), bytes)?;
    Ok(name)
}

/// Writes a dense square matrix: header-free CSV rows, or a JSON object with
/// explicit dimensions.
pub fn write_matrix(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    matrix: &Array2<f64>,
) -> io::Result<String> {
    let (name, bytes) = match format {
        OutputFormat::Csv => {
            let mut text = String::new();
            for row in matrix.rows() {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            (format!("{stem}.csv"), text.into_bytes())
        }
        OutputFormat::Json => {
            let data: Vec<Value> = matrix
                .rows()
                .into_iter()
                .map(|row| {
                    Value::Array(
                        row.iter()
                            .map(|&x| {
                                serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
                            })
                            .collect(),
                    )
                })
                .collect();
            let doc = json!({ "rows": matrix.nrows(), "cols": matrix.ncols(), "data": data });
            let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
            text.push('\n');
            (format!("{stem}.json"), text.into_bytes())
        }
    };
    std::fs::write(dir.join(&name), bytes)?;
    Ok(name)
}
