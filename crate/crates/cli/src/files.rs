//! Output files and the CSV formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use dragtrace::analyzer::{CurvePoint, CurveSeries, DragReport, Histogram};
use tempfile::NamedTempFile;

use crate::CliError;

pub const CURVES_HEADER: [&str; 3] = ["tick", "reachable", "live"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["bin_lo", "bin_hi", "count"];

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(fail)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn to_csv<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = [String; N]>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn curves_csv(series: &CurveSeries) -> Vec<u8> {
    to_csv(
        CURVES_HEADER,
        series
            .points
            .iter()
            .map(|p| [p.tick.to_string(), p.reachable.to_string(), p.live.to_string()]),
    )
}

pub fn histogram_csv(h: &Histogram) -> Vec<u8> {
    to_csv(
        HISTOGRAM_HEADER,
        h.rows().map(|(lo, hi, c)| [lo.to_string(), hi.to_string(), c.to_string()]),
    )
}

pub fn report_csv(report: &DragReport) -> Vec<u8> {
    to_csv(DragReport::CSV_HEADER, [report.csv_row()])
}

/// A CSV written by `analyze`, read back for plotting.
#[derive(Debug, Clone, PartialEq)]
pub enum Series {
    Curves(Vec<CurvePoint>),
    /// `(bin_lo, bin_hi, count)`
    Histogram(Vec<(f64, f64, u64)>),
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, line: u64) -> Result<T, CliError> {
    let raw = record.get(i).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| CliError::input(format!("line {line}: bad value {raw:?} in column {}", i + 1)))
}

pub fn parse_series(text: &str) -> Result<Series, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::input(format!("line 1: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let curves = names == CURVES_HEADER;
    if !curves && names != HISTOGRAM_HEADER {
        return Err(CliError::input(format!(
            "line 1: unrecognized header {:?}; expected `{}` or `{}`",
            names.join(","),
            CURVES_HEADER.join(","),
            HISTOGRAM_HEADER.join(",")
        )));
    }
    let mut points = Vec::new();
    let mut bins = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| CliError::input(format!("line {line}: {e}")))?;
        if record.len() != 3 {
            return Err(CliError::input(format!("line {line}: expected 3 fields, found {}", record.len())));
        }
        if curves {
            let p = CurvePoint {
                tick: field(&record, 0, line)?,
                reachable: field(&record, 1, line)?,
                live: field(&record, 2, line)?,
            };
            if points.last().is_some_and(|q: &CurvePoint| q.tick >= p.tick) {
                return Err(CliError::input(format!("line {line}: ticks must increase")));
            }
            points.push(p);
        } else {
            let (lo, hi): (f64, f64) = (field(&record, 0, line)?, field(&record, 1, line)?);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CliError::input(format!("line {line}: bad bin bounds {lo}..{hi}")));
            }
            bins.push((lo, hi, field(&record, 2, line)?));
        }
    }
    Ok(if curves {
        Series::Curves(points)
    } else {
        Series::Histogram(bins)
    })
}
