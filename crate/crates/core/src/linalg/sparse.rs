use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed in
/// insertion order, so the result only depends on the order of pushes.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        TripletBuilder { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, self.entries)
    }
}

impl SparseMatrix {
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the summation order of duplicates deterministic.
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < n_rows && j < n_cols, "entry ({i}, {j}) outside {n_rows}x{n_cols}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { n_rows, n_cols, row_ptr, col_idx, values, symmetric: false }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix::from_triplets(n_rows, n_cols, Vec::new())
    }

    /// Diagonal matrix.
    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = SparseMatrix::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect());
        m.symmetric = true;
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Checks symmetry to `1e-12·max|A|` and sets the flag accordingly.
    pub fn mark_symmetric(mut self) -> Self {
        self.symmetric = self.symmetry_defect() <= 1e-12 * self.max_abs().max(f64::MIN_POSITIVE);
        self
    }

    pub fn symmetry_defect(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        self.add_scaled(&self.transpose(), -1.0).max_abs()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension");
        (0..self.n_rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `Aᵀx`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows, "transposed matvec dimension");
        let mut y = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = SparseMatrix::from_triplets(self.n_cols, self.n_rows, self.triplets().map(|(i, j, v)| (j, i, v)).collect());
        t.symmetric = self.symmetric;
        t
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &SparseMatrix, s: f64) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut e: Vec<_> = self.triplets().collect();
        e.extend(other.triplets().map(|(i, j, v)| (i, j, s * v)));
        let mut m = SparseMatrix::from_triplets(self.n_rows, self.n_cols, e);
        m.symmetric = self.symmetric && other.symmetric;
        m
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<Self> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut acc = vec![0.0; other.n_cols];
        let mut mark = vec![usize::MAX; other.n_cols];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.n_rows {
            let mut cols = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for j in cols {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { n_rows: self.n_rows, n_cols: other.n_cols, row_ptr, col_idx, values, symmetric: false })
    }

    /// `Pᵀ A P` with the symmetric flag inherited from `A`.
    pub fn congruence(&self, p: &SparseMatrix) -> Result<Self> {
        let mut m = p.transpose().matmul(&self.matmul(p)?)?;
        m.symmetric = self.symmetric;
        Ok(m)
    }

    /// Drops entries with `|v| ≤ tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut m = SparseMatrix::from_triplets(self.n_rows, self.n_cols, self.triplets().filter(|t| t.2.abs() > tol).collect());
        m.symmetric = self.symmetric;
        m
    }

    /// Appends one row and column `c` (and `cᵀ`) with a zero corner.
    pub fn bordered(&self, c: &[f64]) -> Self {
        assert_eq!(self.n_rows, self.n_cols);
        assert_eq!(c.len(), self.n_rows);
        let n = self.n_rows;
        let mut e: Vec<_> = self.triplets().collect();
        for (i, &v) in c.iter().enumerate() {
            if v != 0.0 {
                e.push((i, n, v));
                e.push((n, i, v));
            }
        }
        let mut m = SparseMatrix::from_triplets(n + 1, n + 1, e);
        m.symmetric = self.symmetric;
        m
    }

    /// Symmetric saddle-point matrix `[A Bᵀ; B 0]`, optionally bordered by
    /// one more row and column carrying `c` in the lower block (a mean
    /// constraint on the multiplier).
    pub fn saddle_point(a: &SparseMatrix, b: &SparseMatrix, c: Option<&[f64]>) -> Result<Self> {
        if a.n_rows != a.n_cols || b.n_cols != a.n_cols {
            return Err(Error::DimensionMismatch(format!(
                "saddle blocks {}x{} and {}x{}",
                a.n_rows, a.n_cols, b.n_rows, b.n_cols
            )));
        }
        let (n, m) = (a.n_rows, b.n_rows);
        let mut e: Vec<_> = a.triplets().collect();
        for (i, j, v) in b.triplets() {
            e.push((n + i, j, v));
            e.push((j, n + i, v));
        }
        let mut dim = n + m;
        if let Some(c) = c {
            if c.len() != m {
                return Err(Error::DimensionMismatch(format!("border of length {} for {m} multipliers", c.len())));
            }
            for (i, &v) in c.iter().enumerate() {
                if v != 0.0 {
                    e.push((n + i, dim, v));
                    e.push((dim, n + i, v));
                }
            }
            dim += 1;
        }
        let mut s = SparseMatrix::from_triplets(dim, dim, e);
        s.symmetric = a.symmetric;
        Ok(s)
    }

    /// Dense column-major copy.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub(crate) fn to_faer(&self) -> Result<faer::sparse::SparseColMat<usize, f64>> {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| faer::sparse::Triplet::new(i, j, v)).collect();
        faer::sparse::SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &t)
            .map_err(|e| Error::SolverFailure(format!("sparse conversion: {e:?}")))
    }

    /// MatrixMarket coordinate format (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
        s
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `xᵀ M y`.
pub fn m_inner(m: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &m.mul_vec(y))
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}
