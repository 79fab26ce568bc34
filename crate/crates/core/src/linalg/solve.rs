use std::sync::atomic::{AtomicUsize, Ordering};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::Mat;

use super::sparse::{norm, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Sparse Cholesky; requires a symmetric positive definite matrix.
    Spd,
    /// Sparse LU with pivoting; used for bordered and saddle-point systems.
    SymmetricIndefinite,
}

enum Factor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// Reusable sparse direct factorization.
///
/// Each call to [`solve`](Self::solve) or
/// [`solve_many`](Self::solve_many) counts one sparse solve per right-hand
/// side; [`solve_count`](Self::solve_count) reports the total.
pub struct FactorizedOperator {
    matrix: SparseMatrix,
    factor: Factor,
    kind: FactorKind,
    solves: AtomicUsize,
}

impl std::fmt::Debug for FactorizedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactorizedOperator")
            .field("dim", &self.dim())
            .field("kind", &self.kind)
            .field("solves", &self.solve_count())
            .finish()
    }
}

/// Relative residual accepted after refinement.
const RESIDUAL_TOL: f64 = 1e-10;

pub fn factorize(a: &SparseMatrix, kind: FactorKind) -> Result<FactorizedOperator> {
    FactorizedOperator::new(a, kind)
}

impl FactorizedOperator {
    pub fn new(a: &SparseMatrix, kind: FactorKind) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch(format!("cannot factorize a {}x{} matrix", a.n_rows(), a.n_cols())));
        }
        if kind == FactorKind::Spd && !a.is_symmetric() {
            return Err(Error::NotSpd);
        }
        let fa = a.to_faer()?;
        let factor = match kind {
            FactorKind::Spd => Factor::Llt(fa.sp_cholesky(faer::Side::Lower).map_err(|_| Error::NotSpd)?),
            FactorKind::SymmetricIndefinite => Factor::Lu(fa.sp_lu().map_err(|_| Error::SingularMatrix)?),
        };
        let op = FactorizedOperator { matrix: a.clone(), factor, kind, solves: AtomicUsize::new(0) };
        op.probe()?;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn reset_solve_count(&self) {
        self.solves.store(0, Ordering::Relaxed);
    }

    /// Detects numerically singular factors: a solve with a fixed
    /// right-hand side must be finite and accurate.
    fn probe(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Ok(());
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
        let x = self.raw_solve(std::slice::from_ref(&b)).remove(0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        let r = self.residual(&x, &b);
        let scale = self.matrix.max_abs() * norm(&x) + norm(&b);
        if r > 1e-6 * scale {
            return Err(Error::SingularMatrix);
        }
        Ok(())
    }

    fn raw_solve(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.dim();
        let b = Mat::<f64>::from_fn(n, rhs.len(), |i, j| rhs[j][i]);
        let x = match &self.factor {
            Factor::Llt(f) => f.solve(&b),
            Factor::Lu(f) => f.solve(&b),
        };
        (0..rhs.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect()
    }

    fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_many(&[b.to_vec()])?.remove(0))
    }

    /// Solves for several right-hand sides, with up to two steps of
    /// iterative refinement each.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        for b in rhs {
            if b.len() != n {
                return Err(Error::DimensionMismatch(format!("right-hand side of length {} for dimension {n}", b.len())));
            }
        }
        self.solves.fetch_add(rhs.len(), Ordering::Relaxed);
        let mut xs = self.raw_solve(rhs);
        let a_norm = self.matrix.max_abs();
        for (x, b) in xs.iter_mut().zip(rhs) {
            for _ in 0..2 {
                let ax = self.matrix.mul_vec(x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                if norm(&r) <= 1e-14 * (a_norm * norm(x) + norm(b)) {
                    break;
                }
                let dx = self.raw_solve(&[r]).remove(0);
                x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SolverFailure("non-finite solution".into()));
            }
            let res = self.residual(x, b);
            if res > RESIDUAL_TOL * (a_norm * norm(x) + norm(b)) {
                return Err(Error::SolverFailure(format!("residual {res:e} above tolerance")));
            }
        }
        Ok(xs)
    }
}
