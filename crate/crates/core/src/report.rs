//! CSV reports: one row per sample, preceded by `#` comment lines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::field_io::fmt_f64;

pub trait CsvRow {
    fn header() -> Vec<&'static str>;
    fn record(&self) -> Vec<String>;
}

pub(crate) fn num(v: f64) -> String {
    fmt_f64(v)
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_rows_to<R: CsvRow>(out: impl Write, comment: Option<&str>, rows: &[R]) -> Result<()> {
    let mut out = out;
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(R::header())?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows<R: CsvRow>(path: &Path, comment: Option<&str>, rows: &[R]) -> Result<()> {
    write_rows_to(BufWriter::new(File::create(path)?), comment, rows)
}
