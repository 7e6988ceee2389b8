//! File formats: CSV matrices and vectors, the tensor text format, JSON helpers.
//!
//! CSV: one matrix row per line, comma separated, `.` decimal point, no header.
//! A vector is a single column (one value per line); a single-row file is
//! also accepted when reading a vector.
//!
//! Tensor: first line `n m1 m2`, then the `n` rows of the mode-1 unfolding as
//! CSV with `m1·m2` values each (column index `j + k·m1`).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tensor::Tensor3;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_string(path, &serde_json::to_string_pretty(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cannot parse {tok:?} as a number"),
            })
        })
        .collect()
}

/// Parse CSV text into a matrix; blank lines are skipped.
pub fn parse_csv_matrix(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(line, idx + 1)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} values, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

pub fn format_csv_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            // `{:?}` on f64 is the shortest round-tripping representation
            let _ = write!(s, "{x:?}");
        }
        s.push('\n');
    }
    s
}

pub fn read_csv_matrix(path: &Path) -> Result<Matrix> {
    parse_csv_matrix(&read_to_string(path)?)
}

pub fn write_csv_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_string(path, &format_csv_matrix(m))
}

pub fn read_csv_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_csv_matrix(path)?;
    match m.shape() {
        (_, 1) | (1, _) => Ok(m.into_vec()),
        (r, c) => Err(Error::InvalidDimension(format!(
            "{}: expected a vector, found a {r}x{c} matrix",
            path.display()
        ))),
    }
}

pub fn write_csv_vector(path: &Path, v: &[f64]) -> Result<()> {
    let m = Matrix::from_vec(v.len(), 1, v.to_vec())?;
    write_csv_matrix(path, &m)
}

pub fn parse_tensor(text: &str) -> Result<Tensor3> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hidx, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header line `n m1 m2`".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: hidx + 1,
            msg: "header must be three integers".into(),
        })?;
    let [n, m1, m2] = dims[..] else {
        return Err(Error::Parse {
            line: hidx + 1,
            msg: "header must be three integers".into(),
        });
    };
    let mut data = Vec::with_capacity(n * m1 * m2);
    let mut count = 0;
    for (idx, line) in lines {
        let row = parse_row(line, idx + 1)?;
        if row.len() != m1 * m2 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {} values, found {}", m1 * m2, row.len()),
            });
        }
        data.extend(row);
        count += 1;
    }
    if count != n {
        return Err(Error::Parse {
            line: hidx + 1,
            msg: format!("header declares {n} rows, file has {count}"),
        });
    }
    Tensor3::from_vec((n, m1, m2), data)
}

pub fn format_tensor(t: &Tensor3) -> String {
    let (n, m1, m2) = t.dims();
    format!("{n} {m1} {m2}\n{}", format_csv_matrix(&t.unfold1()))
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    parse_tensor(&read_to_string(path)?)
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    write_string(path, &format_tensor(t))
}
