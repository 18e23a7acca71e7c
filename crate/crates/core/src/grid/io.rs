//! Field tables: comma-separated `i,j,x,y,re,im,mask`, row-major with x
//! fastest, numbers written with 17 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use super::domain::GridDomain;
use super::field::ComplexField;
use crate::error::{Error, Result};

pub const FIELD_HEADER: [&str; 7] = ["i", "j", "x", "y", "re", "im", "mask"];

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_field<W: Write>(field: &ComplexField, out: W) -> Result<()> {
    let d = field.domain();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELD_HEADER)?;
    for (k, v) in field.values().iter().enumerate() {
        let (i, j) = d.coords(k);
        w.write_record([
            i.to_string(),
            j.to_string(),
            fmt_f64(d.x(i)),
            fmt_f64(d.y(j)),
            fmt_f64(v.re),
            fmt_f64(v.im),
            u8::from(field.is_masked(k)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn field_to_string(field: &ComplexField) -> String {
    let mut buf = Vec::new();
    write_field(field, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[derive(Deserialize)]
struct Row {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    re: f64,
    im: f64,
    mask: u8,
}

/// Reads a field table for `domain`, rejecting tables whose node set or
/// coordinates do not match it.
pub fn read_field<R: Read>(domain: GridDomain, input: R) -> Result<ComplexField> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(FIELD_HEADER.iter().copied()) {
        return Err(Error::Table(format!(
            "expected header {}, found {}",
            FIELD_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let n = domain.len();
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    let mut mask = vec![false; n];
    let mut seen = vec![false; n];
    let mut count = 0usize;
    for row in r.deserialize() {
        let row: Row = row?;
        if row.i >= domain.nx() || row.j >= domain.ny() {
            return Err(Error::Table(format!(
                "node ({}, {}) outside {}x{} domain",
                row.i,
                row.j,
                domain.nx(),
                domain.ny()
            )));
        }
        let coord_tol = 1e-9 * (1.0 + domain.y_max().abs().max(domain.y_min().abs()));
        if (row.x - domain.x(row.i)).abs() > coord_tol || (row.y - domain.y(row.j)).abs() > coord_tol {
            return Err(Error::Table(format!(
                "node ({}, {}) has coordinates ({}, {}), domain expects ({}, {})",
                row.i,
                row.j,
                row.x,
                row.y,
                domain.x(row.i),
                domain.y(row.j)
            )));
        }
        let k = domain.index(row.i, row.j);
        if seen[k] {
            return Err(Error::Table(format!("duplicate node ({}, {})", row.i, row.j)));
        }
        seen[k] = true;
        values[k] = Complex64::new(row.re, row.im);
        mask[k] = row.mask != 0;
        count += 1;
    }
    if count != n {
        return Err(Error::Table(format!("table has {count} rows, domain needs {n}")));
    }
    ComplexField::new(domain, values)?.with_mask(mask)
}

pub fn save_field(field: &ComplexField, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, field_to_string(field).as_bytes())
}

pub fn load_field(domain: GridDomain, path: &Path) -> Result<ComplexField> {
    let file = std::fs::File::open(path)?;
    read_field(domain, std::io::BufReader::new(file))
}
