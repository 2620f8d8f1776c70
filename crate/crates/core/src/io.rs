//! File formats: sample CSVs, JSON documents and vector arguments.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Parses `"1.0, -2, 3e-1"` into a vector. Surrounding brackets are allowed.
pub fn parse_vector(text: &str) -> Result<Vector> {
    let t = text.trim();
    let t = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(t);
    if t.trim().is_empty() {
        return Err(Error::invalid("vector argument is empty"));
    }
    let vals = t
        .split(',')
        .map(|s| {
            let s = s.trim();
            let v: f64 = s.parse().map_err(|_| Error::invalid(format!("not a number: {s:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::invalid(format!("vector entries must be finite, got {s}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Vector::from_vec(vals))
}

fn header(out: &mut String, prefix: char, d: usize) {
    for i in 0..d {
        if !out.is_empty() && !out.ends_with('\n') {
            out.push(',');
        }
        let _ = write!(out, "{prefix}{i}");
    }
}

fn row(out: &mut String, parts: &[&Vector]) {
    let mut first = true;
    for p in parts {
        for v in p.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v:?}");
        }
    }
    out.push('\n');
}

/// CSV with header `x0,…,x{d−1}`; values use round-trip formatting.
pub fn samples_csv(points: &[Vector]) -> String {
    let d = points.first().map_or(0, |p| p.len());
    let mut out = String::new();
    header(&mut out, 'x', d);
    out.push('\n');
    for p in points {
        row(&mut out, &[p]);
    }
    out
}

/// CSV with the base point columns `y*` followed by the output columns `x*`.
pub fn paired_csv(ys: &[Vector], xs: &[Vector]) -> String {
    let d = ys.first().map_or(0, |p| p.len());
    let mut out = String::new();
    header(&mut out, 'y', d);
    header(&mut out, 'x', d);
    out.push('\n');
    for (y, x) in ys.iter().zip(xs) {
        row(&mut out, &[y, x]);
    }
    out
}

/// Reads a CSV written by [`samples_csv`] or [`paired_csv`] into rows.
pub fn read_csv_rows(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let head: Vec<String> =
        lines.next().ok_or_else(|| Error::invalid("empty CSV"))?.split(',').map(str::to_owned).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|s| s.parse::<f64>().map_err(|_| Error::invalid(format!("bad CSV value {s:?}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((head, rows))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
