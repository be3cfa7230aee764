use std::io::Write;

use serde_json::Value;

use crate::args::Format;
use crate::error::CliError;

/// A command's result: the JSON document, and the same data as flat rows
/// for table and csv.
pub struct Output {
    pub json: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Output {
    pub fn new(json: Value, header: Vec<String>) -> Self {
        Self {
            json,
            header,
            rows: Vec::new(),
        }
    }
}

/// `name` for one component, `name1..nameN` otherwise.
pub fn columns(name: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![name.to_string()]
    } else {
        (1..=n).map(|i| format!("{name}{i}")).collect()
    }
}

/// Shortest round-trip form, as in the JSON output.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else {
        format!("{x}")
    }
}

pub fn nums(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| num(*x))
}

pub fn render(out: &Output, format: Format, w: &mut impl Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::config("io_error", format!("writing output: {e}"));
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&out.json).expect("JSON values serialize");
            writeln!(w, "{text}").map_err(io)
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            let err = |e: csv::Error| CliError::config("io_error", format!("writing csv: {e}"));
            csv.write_record(&out.header).map_err(err)?;
            for row in &out.rows {
                csv.write_record(row).map_err(err)?;
            }
            csv.flush().map_err(io)
        }
        Format::Table => {
            let mut widths: Vec<usize> = out.header.iter().map(|h| h.len()).collect();
            for row in &out.rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: &[String]| {
                let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                padded.join("  ").trim_end().to_string()
            };
            writeln!(w, "{}", line(&out.header)).map_err(io)?;
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            writeln!(w, "{}", rule.join("  ")).map_err(io)?;
            for row in &out.rows {
                writeln!(w, "{}", line(row)).map_err(io)?;
            }
            Ok(())
        }
    }
}
