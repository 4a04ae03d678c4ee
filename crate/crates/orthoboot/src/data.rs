//! Observation containers and delimited-text import/export.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix of covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    data: Vec<F>,
    rows: usize,
    cols: usize,
}

impl<F: Scalar> Matrix<F> {
    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("matrix needs at least one row"));
        }
        let q = rows[0].len();
        if q == 0 || rows.iter().any(|r| r.len() != q) {
            return Err(Error::invalid("matrix rows must be non-empty and equal length"));
        }
        let mut data = Vec::with_capacity(n * q);
        for r in rows {
            data.extend(r);
        }
        Ok(Matrix { data, rows: n, cols: q })
    }

    pub fn from_flat(data: Vec<F>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::invalid("flat matrix dimensions inconsistent"));
        }
        Ok(Matrix { data, rows, cols })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[F]> {
        self.data.chunks_exact(self.cols)
    }
}

/// Ground-truth values carried by synthetic datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth<F> {
    pub theta0: F,
    /// e0(X_i) for each observation (for the kernel-model design, E(Z|X_i)).
    pub e0: Vec<F>,
    pub g0: Vec<F>,
    /// k_y0(X_i) = E(Y | X_i).
    pub ky0: Vec<F>,
}

/// A sample of n observations (Y, Z, X).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    pub y: Vec<F>,
    pub z: Vec<F>,
    pub x: Matrix<F>,
    pub truth: Option<Truth<F>>,
}

impl<F: Scalar> Dataset<F> {
    pub fn new(y: Vec<F>, z: Vec<F>, x: Matrix<F>, truth: Option<Truth<F>>) -> Result<Self> {
        let n = x.nrows();
        if y.len() != n || z.len() != n {
            return Err(Error::invalid("y, z, x row counts differ"));
        }
        if let Some(t) = &truth {
            if t.e0.len() != n || t.g0.len() != n || t.ky0.len() != n {
                return Err(Error::invalid("truth vectors must have length n"));
            }
        }
        Ok(Dataset { y, z, x, truth })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn num_covariates(&self) -> usize {
        self.x.ncols()
    }
}

/// Write a dataset as comma-delimited text with header `y,z,x1,...,xq`.
/// Truth columns are not exported; they are a property of the generator.
pub fn write_dataset<F: Scalar>(ds: &Dataset<F>, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("y,z");
    for j in 1..=ds.num_covariates() {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for i in 0..ds.len() {
        let _ = write!(out, "{},{}", fmt_scalar(ds.y[i]), fmt_scalar(ds.z[i]));
        for v in ds.x.row(i) {
            let _ = write!(out, ",{}", fmt_scalar(*v));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Round-trip safe formatting (17 significant digits for f64).
fn fmt_scalar<F: Scalar>(v: F) -> String {
    format!("{:?}", v.to_f64().unwrap_or(f64::NAN))
}

/// Read a dataset previously written by [`write_dataset`] (or any delimited
/// file with the same header layout).
pub fn read_dataset<F: Scalar + FromStr>(path: &Path) -> Result<Dataset<F>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "y" || cols[1] != "z" {
        return Err(Error::Parse(format!("unexpected header: {header}")));
    }
    let q = cols.len() - 2;
    let mut y = Vec::new();
    let mut z = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != q + 2 {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                q + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<F> {
            s.parse::<F>()
                .map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", lineno + 2)))
        };
        y.push(parse(fields[0])?);
        z.push(parse(fields[1])?);
        let mut row = Vec::with_capacity(q);
        for f in &fields[2..] {
            row.push(parse(f)?);
        }
        rows.push(row);
    }
    Dataset::new(y, z, Matrix::from_rows(rows)?, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_rejects_ragged_rows() {
        assert!(Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Matrix::<f64>::from_rows(vec![]).is_err());
    }

    #[test]
    fn dataset_checks_dimensions() {
        let x = Matrix::from_rows(vec![vec![1.0], vec![2.0]]).unwrap();
        assert!(Dataset::new(vec![1.0], vec![0.0, 1.0], x, None).is_err());
    }

    #[test]
    fn dataset_round_trips_through_text() {
        let x = Matrix::from_rows(vec![vec![0.25, -1.5], vec![1.0 / 3.0, 2.0]]).unwrap();
        let ds = Dataset::new(vec![1.125, -0.3], vec![1.0, 0.0], x, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        write_dataset(&ds, &path).unwrap();
        let back: Dataset<f64> = read_dataset(&path).unwrap();
        assert_eq!(ds.y, back.y);
        assert_eq!(ds.z, back.z);
        assert_eq!(ds.x, back.x);
    }
}
