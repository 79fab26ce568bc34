//! Sparse matrices, direct solvers and `M`-orthogonalization.

mod solve;
mod sparse;

pub use solve::{factorize, FactorKind, FactorizedOperator};
pub use sparse::{axpy, dot, m_inner, norm, SparseMatrix, TripletBuilder};

/// Result of [`gram_schmidt`]: the accepted orthonormal vectors and the
/// input positions that were dropped.
#[derive(Debug, Clone, Default)]
pub struct Orthonormalized {
    pub vectors: Vec<Vec<f64>>,
    pub dropped: Vec<usize>,
}

/// Twice-applied modified Gram–Schmidt in the `M` inner product.
///
/// A vector is dropped when its `M`-norm after orthogonalization falls below
/// `tol` times its input norm.
pub fn gram_schmidt(vectors: &[Vec<f64>], m: &SparseMatrix, tol: f64) -> Orthonormalized {
    let mut out = Orthonormalized::default();
    for (i, v) in vectors.iter().enumerate() {
        match orthonormalize_against(v, &out.vectors, m, tol) {
            Some(w) => out.vectors.push(w),
            None => out.dropped.push(i),
        }
    }
    out
}

/// Orthogonalizes `v` against an `M`-orthonormal set and normalizes it;
/// `None` if the remainder is below `tol` relative to `‖v‖_M`.
pub fn orthonormalize_against(v: &[f64], basis: &[Vec<f64>], m: &SparseMatrix, tol: f64) -> Option<Vec<f64>> {
    let n0 = m_inner(m, v, v).sqrt();
    if !(n0 > 0.0) {
        return None;
    }
    let (mut w, n1) = orthogonalize(v, basis, m);
    if n1 < tol * n0 {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= n1);
    Some(w)
}

/// Removes the components of `v` along an `M`-orthonormal set (two MGS
/// sweeps) and returns the remainder with its `M`-norm.
pub fn orthogonalize(v: &[f64], basis: &[Vec<f64>], m: &SparseMatrix) -> (Vec<f64>, f64) {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = m_inner(m, b, &w);
            axpy(&mut w, -c, b);
        }
    }
    let n = m_inner(m, &w, &w).sqrt();
    (w, n)
}

/// Dense Gram matrix `[vᵢᵀ M vⱼ]`.
pub fn gram_matrix(vectors: &[Vec<f64>], m: &SparseMatrix) -> nalgebra::DMatrix<f64> {
    let mv: Vec<Vec<f64>> = vectors.iter().map(|v| m.mul_vec(v)).collect();
    nalgebra::DMatrix::from_fn(vectors.len(), vectors.len(), |i, j| dot(&vectors[i], &mv[j]))
}
