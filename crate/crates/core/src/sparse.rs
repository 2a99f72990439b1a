//! Compressed sparse row storage with a coordinate-triplet interchange format.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coordinate-format entries `(row, col, value)`; duplicates are summed on conversion.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.entries.push((row, col, value));
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self)
    }

    /// Writes the header `rows cols nnz` followed by one `i j value` line per
    /// entry (zero-based indices, 17 significant digits).
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.rows, self.cols, self.entries.len())?;
        for &(i, j, v) in &self.entries {
            writeln!(out, "{} {} {:.16e}", i, j, v)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty triplet file".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("bad triplet header `{header}`: {e}")))?;
        if head.len() != 3 {
            return Err(Error::Parse(format!("bad triplet header `{header}`")));
        }
        let mut t = Triplets::new(head[0], head[1]);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse_err = || Error::Parse(format!("bad triplet line `{line}`"));
            let i: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(parse_err)?;
            let j: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(parse_err)?;
            let v: f64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(parse_err)?;
            if i >= t.rows || j >= t.cols {
                return Err(Error::Parse(format!("triplet ({i}, {j}) out of bounds")));
            }
            t.push(i, j, v);
        }
        if t.nnz() != head[2] {
            return Err(Error::Parse(format!(
                "header announced {} entries, found {}",
                head[2],
                t.nnz()
            )));
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_triplets(t: &Triplets) -> Self {
        let mut sorted = t.entries.clone();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; t.rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(j);
            values.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..t.rows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            rows: t.rows,
            cols: t.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse copy of a dense matrix, keeping entries with `|a_ij| > drop_tol`.
    pub fn from_dense(a: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut t = Triplets::new(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v.abs() > drop_tol {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csr()
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| v * x[j]).sum()
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    /// `y += alpha A x`
    pub fn mul_vec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += alpha * self.row_dot(i, x);
        }
    }

    /// `y += alpha A^T x`
    pub fn mul_transpose_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                y[j] += alpha * v * xi;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Triplets::new(self.cols, self.rows);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                t.push(j, i, v);
            }
        }
        t.to_csr()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn to_triplets(&self) -> Triplets {
        let mut t = Triplets::new(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                t.push(i, j, v);
            }
        }
        t
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                a[(i, j)] += v;
            }
        }
        a
    }
}

/// Applies `out += alpha * op` along one axis of a field stored column-major
/// with `nx` lines of `ny` contiguous points (index `ix * ny + iy`).
pub(crate) fn apply_along_x(
    op: &CsrMatrix,
    alpha: f64,
    nx: usize,
    ny: usize,
    x: &[f64],
    out: &mut [f64],
) {
    debug_assert_eq!(op.nrows(), nx);
    for ix in 0..nx {
        let dst = &mut out[ix * ny..(ix + 1) * ny];
        for (k, v) in op.row(ix) {
            let a = alpha * v;
            let src = &x[k * ny..(k + 1) * ny];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
}

pub(crate) fn apply_along_y(
    op: &CsrMatrix,
    alpha: f64,
    nx: usize,
    ny: usize,
    x: &[f64],
    out: &mut [f64],
) {
    debug_assert_eq!(op.nrows(), ny);
    for ix in 0..nx {
        let src = &x[ix * ny..(ix + 1) * ny];
        let dst = &mut out[ix * ny..(ix + 1) * ny];
        for (iy, d) in dst.iter_mut().enumerate() {
            *d += alpha * op.row_dot(iy, src);
        }
    }
}
