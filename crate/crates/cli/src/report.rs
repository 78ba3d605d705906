use std::fs;
use std::io::Write;
use std::path::Path;

use carnot_core::{Error, Result};
use serde::Serialize;

/// `{:.16e}`: 17 significant digits, '.' decimal point, no locale.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

/// One line of a pass/fail table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Row {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    /// Passes when `value >= tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }

    pub fn flag(name: impl Into<String>, value: f64, tolerance: f64, pass: bool) -> Self {
        Self { name: name.into(), value, tolerance, pass }
    }
}

/// A CSV table held in memory so it can go to a file or to stdout.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[String]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).map_err(csv_err)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(csv_err)
    }

    pub fn into_string(self) -> Result<String> {
        let bytes = self.writer.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn rows_csv(rows: &[Row]) -> Result<String> {
    let mut t = Table::new(&["name".into(), "value".into(), "tolerance".into(), "pass".into()])?;
    for r in rows {
        t.row(&[r.name.clone(), num(r.value), num(r.tolerance), r.pass.to_string()])?;
    }
    t.into_string()
}

/// Writes `stem.csv` (and `stem.json` when given) under `out`, or prints the CSV.
pub fn emit(out: Option<&Path>, stem: &str, csv_text: &str, json: Option<&serde_json::Value>) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{stem}.csv")), csv_text)?;
            if let Some(j) = json {
                let mut text = serde_json::to_string_pretty(j)?;
                text.push('\n');
                fs::write(dir.join(format!("{stem}.json")), text)?;
            }
        }
        None => print_stdout(csv_text)?,
    }
    Ok(())
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
pub fn print_stdout(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Writes an extra CSV next to the main one; skipped without an output directory.
pub fn emit_extra(out: Option<&Path>, stem: &str, csv_text: &str) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), csv_text)?;
    }
    Ok(())
}
