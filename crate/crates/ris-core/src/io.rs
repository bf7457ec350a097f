//! Plain-text exchange format for partitioned network matrices.
//!
//! Line 1 is a header:
//!
//! ```text
//! # kind=Z z0=50 partition=<N_T>,<K>,<N_R>[,<N_O>]
//! ```
//!
//! followed by N rows of N comma-separated complex entries written as
//! `re:im` with 17 significant digits, so values round-trip exactly. The
//! format is ASCII and locale-independent; externally produced matrices
//! (e.g. from full-wave solvers) can be exported into it and consumed here.

use std::fmt::Write as FmtWrite;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::network::{MatrixKind, Partition, PartitionedNetworkMatrix};

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed matrix file: {0}")]
    Malformed(String),
    #[error("inconsistent matrix file: {0}")]
    Inconsistent(String),
}

fn kind_tag(kind: MatrixKind) -> &'static str {
    match kind {
        MatrixKind::Impedance => "Z",
        MatrixKind::Scattering => "S",
    }
}

/// Serializes a matrix to the exchange format.
pub fn write_matrix<W: Write>(
    mut w: W,
    m: &PartitionedNetworkMatrix,
) -> Result<(), MatrixFileError> {
    let p = m.partition();
    let mut header = format!(
        "# kind={} z0={} partition={},{},{}",
        kind_tag(m.kind()),
        m.reference_impedance(),
        p.n_t,
        p.k,
        p.n_r
    );
    if p.n_o > 0 {
        let _ = write!(header, ",{}", p.n_o);
    }
    writeln!(w, "{header}")?;
    let n = m.n();
    let mut line = String::new();
    for i in 0..n {
        line.clear();
        for j in 0..n {
            if j > 0 {
                line.push(',');
            }
            let z = m.data()[(i, j)];
            let _ = write!(line, "{:.16e}:{:.16e}", z.re, z.im);
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Parses a matrix from the exchange format.
pub fn read_matrix<R: BufRead>(r: R) -> Result<PartitionedNetworkMatrix, MatrixFileError> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| MatrixFileError::Malformed("empty file".into()))??;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| MatrixFileError::Malformed("header must start with '#'".into()))?
        .trim();

    let mut kind = None;
    let mut z0 = None;
    let mut partition = None;
    for token in header.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| MatrixFileError::Malformed(format!("bad header token `{token}`")))?;
        match key {
            "kind" => {
                kind = Some(match value {
                    "Z" => MatrixKind::Impedance,
                    "S" => MatrixKind::Scattering,
                    other => {
                        return Err(MatrixFileError::Malformed(format!(
                            "unknown matrix kind `{other}`"
                        )))
                    }
                });
            }
            "z0" => {
                z0 =
                    Some(value.parse::<f64>().map_err(|e| {
                        MatrixFileError::Malformed(format!("bad z0 `{value}`: {e}"))
                    })?);
            }
            "partition" => {
                let counts: Result<Vec<usize>, _> =
                    value.split(',').map(|v| v.parse::<usize>()).collect();
                let counts = counts.map_err(|e| {
                    MatrixFileError::Malformed(format!("bad partition `{value}`: {e}"))
                })?;
                partition = Some(match counts.as_slice() {
                    [n_t, k, n_r] => Partition::new(*n_t, *k, *n_r),
                    [n_t, k, n_r, n_o] => Partition {
                        n_t: *n_t,
                        k: *k,
                        n_r: *n_r,
                        n_o: *n_o,
                    },
                    _ => {
                        return Err(MatrixFileError::Malformed(
                            "partition needs 3 or 4 counts".into(),
                        ))
                    }
                });
            }
            other => {
                return Err(MatrixFileError::Malformed(format!(
                    "unknown header key `{other}`"
                )))
            }
        }
    }
    let kind = kind.ok_or_else(|| MatrixFileError::Malformed("header misses kind".into()))?;
    let z0 = z0.ok_or_else(|| MatrixFileError::Malformed("header misses z0".into()))?;
    let partition =
        partition.ok_or_else(|| MatrixFileError::Malformed("header misses partition".into()))?;

    let n = partition.total();
    let mut data = DMatrix::<Complex64>::zeros(n, n);
    let mut row = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= n {
            return Err(MatrixFileError::Inconsistent(format!(
                "more than {n} data rows"
            )));
        }
        let mut col = 0usize;
        for entry in line.split(',') {
            if col >= n {
                return Err(MatrixFileError::Inconsistent(format!(
                    "row {row} has more than {n} entries"
                )));
            }
            let (re, im) = entry.trim().split_once(':').ok_or_else(|| {
                MatrixFileError::Malformed(format!("bad entry `{entry}` at row {row}"))
            })?;
            let re = re.parse::<f64>().map_err(|e| {
                MatrixFileError::Malformed(format!("bad real part `{re}` at row {row}: {e}"))
            })?;
            let im = im.parse::<f64>().map_err(|e| {
                MatrixFileError::Malformed(format!("bad imaginary part `{im}` at row {row}: {e}"))
            })?;
            data[(row, col)] = Complex64::new(re, im);
            col += 1;
        }
        if col != n {
            return Err(MatrixFileError::Inconsistent(format!(
                "row {row} has {col} entries, expected {n}"
            )));
        }
        row += 1;
    }
    if row != n {
        return Err(MatrixFileError::Inconsistent(format!(
            "{row} data rows, expected {n}"
        )));
    }
    PartitionedNetworkMatrix::new(kind, data, partition, z0)
        .map_err(|e| MatrixFileError::Inconsistent(e.to_string()))
}

pub fn save_matrix(path: &Path, m: &PartitionedNetworkMatrix) -> Result<(), MatrixFileError> {
    let file = std::fs::File::create(path)?;
    write_matrix(std::io::BufWriter::new(file), m)
}

pub fn load_matrix(path: &Path) -> Result<PartitionedNetworkMatrix, MatrixFileError> {
    let file = std::fs::File::open(path)?;
    read_matrix(std::io::BufReader::new(file))
}
