//! Minimal Matrix Market reader/writer for real matrices and vectors.
//!
//! Dense data is written in `array` format (column-major, as the format
//! requires), sparse data in `coordinate` format. Values use the shortest
//! round-trip decimal form so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::DenseMatrix;

pub fn dense_to_string(a: &DenseMatrix) -> String {
    let mut s = String::with_capacity(a.n_rows() * a.n_cols() * 24 + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", a.n_rows(), a.n_cols());
    for j in 0..a.n_cols() {
        for i in 0..a.n_rows() {
            let _ = writeln!(s, "{:e}", a.get(i, j));
        }
    }
    s
}

/// Coordinate format listing every nonzero, row by row.
pub fn sparse_to_string(a: &DenseMatrix) -> String {
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz());
    for i in 0..a.n_rows() {
        for (j, &v) in a.row(i).iter().enumerate() {
            if v != 0.0 {
                let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
            }
        }
    }
    s
}

pub fn vector_to_string(v: &[f64]) -> String {
    let col = DenseMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>());
    if v.is_empty() {
        return "%%MatrixMarket matrix array real general\n0 1\n".to_string();
    }
    dense_to_string(&col)
}

pub fn write_dense(path: &Path, a: &DenseMatrix) -> Result<()> {
    fs::write(path, dense_to_string(a)).map_err(|e| Error::io(path, e))
}

pub fn write_sparse(path: &Path, a: &DenseMatrix) -> Result<()> {
    fs::write(path, sparse_to_string(a)).map_err(|e| Error::io(path, e))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    fs::write(path, vector_to_string(v)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text).map_err(|reason| Error::MatrixMarket {
        path: path.to_path_buf(),
        reason,
    })
}

/// Reads an `n x 1` (or `1 x n`) array as a vector.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.n_cols() != 1 && m.n_rows() != 1 {
        return Err(Error::MatrixMarket {
            path: path.to_path_buf(),
            reason: format!("expected a vector, found {}x{}", m.n_rows(), m.n_cols()),
        });
    }
    Ok(m.entries().to_vec())
}

#[derive(Clone, Copy, PartialEq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn parse_matrix(text: &str) -> std::result::Result<DenseMatrix, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let h: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(format!("bad header `{header}`"));
    }
    let layout = match h[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(format!("unsupported layout `{other}`")),
    };
    if !matches!(h[3].as_str(), "real" | "double" | "integer") {
        return Err(format!("unsupported field `{}`", h[3]));
    }
    let symmetry = match h[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(format!("unsupported symmetry `{other}`")),
    };

    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body.next().ok_or("missing size line")?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad size `{t}`")))
        .collect::<std::result::Result<_, _>>()?;
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad value `{t}`"));

    let mut m;
    match layout {
        Layout::Array => {
            let [rows, cols] = sizes[..] else {
                return Err(format!("array size line needs 2 fields: `{size_line}`"));
            };
            m = DenseMatrix::zeros(rows, cols);
            let mut count = 0usize;
            let total = if symmetry == Symmetry::Symmetric {
                rows * (rows + 1) / 2
            } else {
                rows * cols
            };
            let mut i = 0;
            let mut j = 0;
            for line in body {
                if count == total {
                    return Err("more values than the size line declares".into());
                }
                let v = num(line)?;
                m.set(i, j, v);
                if symmetry == Symmetry::Symmetric {
                    m.set(j, i, v);
                }
                count += 1;
                i += 1;
                if i == rows {
                    j += 1;
                    i = if symmetry == Symmetry::Symmetric { j } else { 0 };
                }
            }
            if count != total {
                return Err(format!("expected {total} values, found {count}"));
            }
        }
        Layout::Coordinate => {
            let [rows, cols, nnz] = sizes[..] else {
                return Err(format!("coordinate size line needs 3 fields: `{size_line}`"));
            };
            m = DenseMatrix::zeros(rows, cols);
            let mut count = 0usize;
            for line in body {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(format!("bad entry `{line}`"));
                }
                let i: usize = t[0].parse().map_err(|_| format!("bad row `{}`", t[0]))?;
                let j: usize = t[1].parse().map_err(|_| format!("bad column `{}`", t[1]))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(format!("index ({i}, {j}) out of range"));
                }
                let v = num(t[2])?;
                m.set(i - 1, j - 1, v);
                if symmetry == Symmetry::Symmetric {
                    m.set(j - 1, i - 1, v);
                }
                count += 1;
            }
            if count != nnz {
                return Err(format!("expected {nnz} entries, found {count}"));
            }
        }
    }
    if !m.is_finite() {
        return Err("non-finite value".into());
    }
    Ok(m)
}
