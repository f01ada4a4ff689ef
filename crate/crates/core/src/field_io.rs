//! Field CSV persistence.
//!
//! Format: optional leading `#` comment lines, a header `x1,...,xN,value`,
//! then one row per set node in increasing node order. Numbers are written
//! in scientific notation with 17 significant digits so that a write/read
//! cycle is the identity on finite values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, NodeClass, ScalarField};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_header(dim: usize) -> String {
    let mut cols: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    cols.push("value".to_string());
    cols.join(",")
}

/// Writes `field` to `out`, preceded by `comment` lines (each prefixed with `# `).
pub fn write_field_to(
    out: &mut impl Write,
    field: &ScalarField,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let grid = field.grid();
    writeln!(out, "{}", field_header(grid.dim()))?;
    let mut x = [0.0; 3];
    for (node, v) in field.iter_set() {
        grid.coords_into(node, &mut x);
        for xk in &x[..grid.dim()] {
            write!(out, "{},", fmt_f64(*xk))?;
        }
        writeln!(out, "{}", fmt_f64(v))?;
    }
    Ok(())
}

pub fn write_field(path: &Path, field: &ScalarField, comment: Option<&str>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_field_to(&mut out, field, comment)?;
    out.flush()?;
    Ok(())
}

/// Reads a field CSV written for `grid`.
pub fn read_field(path: &Path, grid: &Arc<Grid>) -> Result<ScalarField> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;

    let header = reader.headers()?.clone();
    let header_line = reader.position().line().max(1);
    let expected = field_header(grid.dim());
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != expected {
        return Err(parse_err(
            header_line,
            format!(
                "header '{}' does not match expected '{}' (dimension mismatch?)",
                got.join(","),
                expected
            ),
        ));
    }

    let dim = grid.dim();
    let mut field = ScalarField::unset(grid);
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != dim + 1 {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", dim + 1, record.len()),
            ));
        }
        let mut nums = [0.0f64; 4];
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("cannot parse '{cell}' as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value '{cell}'")));
            }
            nums[k] = v;
        }
        let node = grid
            .locate(&nums[..dim])
            .ok_or_else(|| parse_err(line, format!("{:?} is not a grid node", &nums[..dim])))?;
        if grid.class(node) == NodeClass::Exterior {
            return Err(parse_err(line, format!("{:?} is an exterior node", &nums[..dim])));
        }
        if field.get(node).is_some() {
            return Err(parse_err(line, format!("duplicate node {:?}", &nums[..dim])));
        }
        field.set(node, nums[dim])?;
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(header_line, "field file contains no rows".to_string()));
    }
    Ok(field)
}
