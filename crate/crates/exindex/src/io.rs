//! Plain-text and CSV formats.
//!
//! - series: one value per line; blank lines and `#` comments ignored.
//! - measure: CSV `s,t,w` with header.
//! - curve: CSV `t,k_t,theta_hat,variant,flag`; `theta_hat` is empty and
//!   `flag` holds the error code where a point failed.
//! - kernel: CSV `s,t,c,c_g,c_fg` in long format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use exindex_core::biascorrect::{Atom, SignedMeasureAtoms};
use exindex_core::clusterproc::GridKernel;
use exindex_core::estimate::{CurveEntry, ThresholdCurve};
use exindex_core::sim::SeriesSample;

use crate::error::{AppError, AppResult};
use crate::format::num;

pub fn open(path: &Path) -> AppResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::io(path, e))
}

pub fn create(path: &Path) -> AppResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::io(path, e))
}

/// File when a path is given, stdout otherwise.
pub fn output(path: Option<&Path>) -> AppResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

pub fn parse_series<R: Read>(reader: R, origin: &Path) -> AppResult<SeriesSample> {
    let mut values = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| AppError::io(origin, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = body.parse().map_err(|_| AppError::Format {
            path: origin.to_owned(),
            line: i + 1,
            message: format!("not a number: {body:?}"),
        })?;
        values.push(v);
    }
    Ok(SeriesSample::from_values(values)?)
}

pub fn read_series(path: &Path) -> AppResult<SeriesSample> {
    parse_series(open(path)?, path)
}

pub fn write_series<W: Write>(mut out: W, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        writeln!(out, "{}", num(*v))?;
    }
    out.flush()
}

#[derive(serde::Deserialize)]
struct AtomRow {
    s: f64,
    t: f64,
    w: f64,
}

pub fn parse_measure<R: Read>(reader: R) -> AppResult<SignedMeasureAtoms> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let atoms = rdr
        .deserialize::<AtomRow>()
        .map(|row| row.map(|r| Atom::new(r.s, r.t, r.w)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SignedMeasureAtoms::custom(atoms)?)
}

pub fn read_measure(path: &Path) -> AppResult<SignedMeasureAtoms> {
    parse_measure(open(path)?)
}

pub fn write_measure<W: Write>(out: W, mu: &SignedMeasureAtoms) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "t", "w"])?;
    for a in mu.atoms() {
        w.write_record([num(a.s), num(a.t), num(a.w)])?;
    }
    w.flush().map_err(|e| AppError::io("<measure>", e))
}

fn entry_cells(e: &CurveEntry) -> [String; 2] {
    match &e.estimate {
        Ok(v) => [num(*v), String::new()],
        Err(err) => [String::new(), err.code().to_owned()],
    }
}

pub fn write_curve_entries<W: Write>(
    out: W,
    entries: &[CurveEntry],
    variant: &str,
) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "k_t", "theta_hat", "variant", "flag"])?;
    for e in entries {
        let [value, flag] = entry_cells(e);
        w.write_record([num(e.t), e.k_t.to_string(), value, variant.to_owned(), flag])?;
    }
    w.flush().map_err(|e| AppError::io("<curve>", e))
}

pub fn write_curve<W: Write>(out: W, curve: &ThresholdCurve) -> AppResult<()> {
    write_curve_entries(out, &curve.entries, curve.variant.as_str())
}

pub fn write_kernel<W: Write>(out: W, kernel: &GridKernel) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s", "t", "c", "c_g", "c_fg"])?;
    let p = kernel.grid.len();
    for (i, &s) in kernel.grid.iter().enumerate() {
        for (j, &t) in kernel.grid.iter().enumerate() {
            let at = i * p + j;
            w.write_record([
                num(s),
                num(t),
                num(kernel.c[at]),
                num(kernel.c_g[at]),
                num(kernel.c_fg[at]),
            ])?;
        }
    }
    w.flush().map_err(|e| AppError::io("<kernel>", e))
}
