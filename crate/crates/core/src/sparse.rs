//! Compressed sparse row matrices with deterministic assembly, plus a thin
//! wrapper around faer's sparse Cholesky factorization.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    /// Sums duplicate entries. Triplets are stably sorted by position first,
    /// so the summation order (and hence every bit of the result) depends
    /// only on the input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<f64> = Vec::with_capacity(trips.len());
        let mut last = None;
        for (r, c, v) in trips {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .into_par_iter()
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `|A| |x|`, the scale of rounding errors in `A x`.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .into_par_iter()
            .map(|r| self.row(r).map(|(c, v)| (v * x[c]).abs()).sum())
            .collect()
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> Self {
        let trips = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, trips)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trips = self.triplets();
        trips.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, s * v)));
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trips = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    trips.push((r, c, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// `Pᵀ A P` for a rectangular `P`.
    pub fn congruence(&self, p: &Self) -> Self {
        p.transpose().matmul(&self.matmul(p))
    }

    /// `max |A_ij - A_ji| / max |A_ij|`.
    pub fn symmetry_error(&self) -> f64 {
        let t = self.transpose();
        let diff = self.add_scaled(&t, -1.0);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        diff.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<Triplet<usize, usize, f64>> =
            self.triplets().into_iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::Solver(format!("sparse conversion failed: {e:?}")))
    }

    /// Coordinate text: one `row col value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = format!("% {} {} {}\n", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{r} {c} {v:.16e}");
        }
        s
    }

    pub fn from_coordinate_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix('%'))
            .ok_or_else(|| Error::Parse("missing '%' size line".into()))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad size token {t}"))))
            .collect::<Result<_>>()?;
        if head.len() != 3 {
            return Err(Error::Parse("size line needs rows, cols, nnz".into()));
        }
        let mut trips = Vec::with_capacity(head[2]);
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad entry line: {l}")));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad index {s}")));
            let v = f[2].parse::<f64>().map_err(|_| Error::Parse(format!("bad value {}", f[2])))?;
            trips.push((p(f[0])?, p(f[1])?, v));
        }
        Ok(Self::from_triplets(head[0], head[1], trips))
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct Cholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl Cholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Contract("Cholesky of a non-square matrix".into()));
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    /// Solves for several right-hand sides stored as columns.
    pub fn solve_many(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if cols.is_empty() {
            return Vec::new();
        }
        let mut m = Mat::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        self.llt.solve_in_place(m.as_mut());
        (0..cols.len()).map(|j| (0..self.n).map(|i| m[(i, j)]).collect()).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
