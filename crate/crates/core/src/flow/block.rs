use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hodge::{symmetrized, HarmonicBasis, HodgeContext};
use crate::linalg::{dot, factorize, norm, FactorKind, FactorizedOperator, SparseMatrix, TripletBuilder};

/// `T = [E | H]`: maps `(ψ, h)` to BDM coefficients `Eψ + Σ hᵢ 𝐡ᵢ`.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    rot: SparseMatrix,
    harmonic: Vec<Vec<f64>>,
    /// `∫ φ_i` of the streamfunction basis on closed surfaces.
    gauge: Option<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(ctx: &HodgeContext, basis: &HarmonicBasis) -> Result<Self> {
        basis.check(ctx)?;
        Ok(EmbeddingMatrix {
            rot: ctx.rot().clone(),
            harmonic: basis.vectors.clone(),
            gauge: ctx.stream_mean().map(<[f64]>::to_vec),
        })
    }

    pub fn n_stream(&self) -> usize {
        self.rot.n_cols()
    }

    pub fn n_harmonic(&self) -> usize {
        self.harmonic.len()
    }

    pub fn n_velocity(&self) -> usize {
        self.rot.n_rows()
    }

    pub fn rot(&self) -> &SparseMatrix {
        &self.rot
    }

    pub fn harmonic(&self) -> &[Vec<f64>] {
        &self.harmonic
    }

    pub fn gauge(&self) -> Option<&[f64]> {
        self.gauge.as_deref()
    }

    /// `Eψ + Σ hᵢ 𝐡ᵢ`.
    pub fn apply(&self, psi: &[f64], h: &[f64]) -> Vec<f64> {
        let mut u = self.rot.mul_vec(psi);
        for (v, &a) in self.harmonic.iter().zip(h) {
            crate::linalg::axpy(&mut u, a, v);
        }
        u
    }

    /// `(Eᵀy, Hᵀy)`.
    pub fn apply_transpose(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.rot.tr_mul_vec(y), self.harmonic.iter().map(|h| dot(h, y)).collect())
    }

    /// `T` as one sparse matrix (the harmonic columns are dense).
    pub fn to_sparse(&self) -> SparseMatrix {
        let ns = self.n_stream();
        let mut b = TripletBuilder::new(self.n_velocity(), ns + self.n_harmonic());
        for (i, j, v) in self.rot.triplets() {
            b.push(i, j, v);
        }
        for (c, h) in self.harmonic.iter().enumerate() {
            for (i, &v) in h.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, ns + c, v);
                }
            }
        }
        b.build()
    }
}

/// `TᵀAT` and `Tᵀb` split by the `(ψ, h)` ordering.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub a_ss: SparseMatrix,
    pub a_sh: DMatrix<f64>,
    pub a_hs: DMatrix<f64>,
    pub a_hh: DMatrix<f64>,
    pub b_s: Vec<f64>,
    pub b_h: Vec<f64>,
    /// Mean functional fixing the constant in `ψ` on closed surfaces.
    pub gauge: Option<Vec<f64>>,
}

impl BlockSystem {
    pub fn n_stream(&self) -> usize {
        self.a_ss.n_rows()
    }

    pub fn n_harmonic(&self) -> usize {
        self.a_hh.nrows()
    }

    /// Full reduced matrix as a dense array (tests and small fallbacks).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (ns, nh) = (self.n_stream(), self.n_harmonic());
        let mut d = DMatrix::zeros(ns + nh, ns + nh);
        d.view_mut((0, 0), (ns, ns)).copy_from(&self.a_ss.to_dense());
        d.view_mut((0, ns), (ns, nh)).copy_from(&self.a_sh);
        d.view_mut((ns, 0), (nh, ns)).copy_from(&self.a_hs);
        d.view_mut((ns, ns), (nh, nh)).copy_from(&self.a_hh);
        d
    }

    /// Matrix–vector product with the full reduced matrix.
    pub fn apply(&self, x_s: &[f64], x_h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let xh = DVector::from_column_slice(x_h);
        let mut y_s = self.a_ss.mul_vec(x_s);
        let sh = &self.a_sh * &xh;
        y_s.iter_mut().zip(sh.iter()).for_each(|(y, v)| *y += v);
        let y_h = &self.a_hs * DVector::from_column_slice(x_s) + &self.a_hh * &xh;
        (y_s, y_h.iter().copied().collect())
    }

    /// Replaces the right-hand side by `Tᵀb`.
    pub fn set_rhs(&mut self, t: &EmbeddingMatrix, b: &[f64]) -> Result<()> {
        if b.len() != t.n_velocity() {
            return Err(Error::DimensionMismatch(format!("right-hand side of length {} for {} dofs", b.len(), t.n_velocity())));
        }
        (self.b_s, self.b_h) = t.apply_transpose(b);
        Ok(())
    }
}

pub fn build_reduced_system(a: &SparseMatrix, b: &[f64], t: &EmbeddingMatrix) -> Result<BlockSystem> {
    let n = t.n_velocity();
    if a.n_rows() != n || a.n_cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator {}x{} and load {} for an embedding with {n} rows",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    let a_ss = a.congruence(&t.rot)?;
    let a_ss = if a.is_symmetric() { symmetrized(&a_ss) } else { a_ss };
    let nh = t.n_harmonic();
    let ns = t.n_stream();
    let ah: Vec<Vec<f64>> = t.harmonic.iter().map(|h| a.mul_vec(h)).collect();
    let ath: Vec<Vec<f64>> = t.harmonic.iter().map(|h| a.tr_mul_vec(h)).collect();
    let mut a_sh = DMatrix::zeros(ns, nh);
    let mut a_hs = DMatrix::zeros(nh, ns);
    let mut a_hh = DMatrix::zeros(nh, nh);
    for j in 0..nh {
        a_sh.set_column(j, &DVector::from_vec(t.rot.tr_mul_vec(&ah[j])));
        a_hs.set_row(j, &DVector::from_vec(t.rot.tr_mul_vec(&ath[j])).transpose());
        for i in 0..nh {
            a_hh[(i, j)] = dot(&t.harmonic[i], &ah[j]);
        }
    }
    if a.is_symmetric() {
        // Exact symmetry of the dense blocks.
        a_hs = a_sh.transpose();
        a_hh = 0.5 * (&a_hh + a_hh.transpose());
    }
    let (b_s, b_h) = t.apply_transpose(b);
    Ok(BlockSystem { a_ss, a_sh, a_hs, a_hh, b_s, b_h, gauge: t.gauge.clone() })
}

fn factorize_ss(sys: &BlockSystem) -> Result<FactorizedOperator> {
    match &sys.gauge {
        Some(c) => factorize(&sys.a_ss.bordered(c), FactorKind::SymmetricIndefinite),
        None if sys.a_ss.is_symmetric() => factorize(&sys.a_ss, FactorKind::Spd),
        None => factorize(&sys.a_ss, FactorKind::SymmetricIndefinite),
    }
}

fn solve_ss(op: &FactorizedOperator, gauged: bool, rhs: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let n = rhs.first().map_or(0, Vec::len);
    let rhs: Vec<Vec<f64>> = rhs
        .into_iter()
        .map(|mut r| {
            if gauged {
                r.push(0.0);
            }
            r
        })
        .collect();
    let mut x = op.solve_many(&rhs)?;
    x.iter_mut().for_each(|v| v.truncate(n));
    Ok(x)
}

/// Relative reciprocal condition below which `S_HH` counts as singular.
const SCHUR_RCOND: f64 = 1e-13;

fn schur_lu(s: DMatrix<f64>) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if s.nrows() > 0 {
        let sv = s.clone().singular_values();
        let max = sv.max();
        if !(max > 0.0) || sv.min() < SCHUR_RCOND * max || sv.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularSchur);
        }
    }
    Ok(s.lu())
}

/// Solution of a block system together with the number of sparse solves.
#[derive(Debug, Clone)]
pub struct SchurSolution {
    pub x_s: Vec<f64>,
    pub x_h: Vec<f64>,
    pub sparse_solves: usize,
}

/// Eliminates `x_S`: `S_HH = A_HH − A_HS A_SS⁻¹ A_SH`, then back-substitutes.
/// Uses one factorization of `A_SS` and `N_H + 1` sparse solves.
pub fn schur_solve(sys: &BlockSystem) -> Result<SchurSolution> {
    let op = factorize_ss(sys)?;
    let nh = sys.n_harmonic();
    let mut rhs = vec![sys.b_s.clone()];
    rhs.extend((0..nh).map(|j| sys.a_sh.column(j).iter().copied().collect::<Vec<f64>>()));
    let sol = solve_ss(&op, sys.gauge.is_some(), rhs)?;
    let z = DVector::from_vec(sol[0].clone());
    let y = DMatrix::from_fn(sys.n_stream(), nh, |i, j| sol[j + 1][i]);
    let s = &sys.a_hh - &sys.a_hs * &y;
    let g = DVector::from_vec(sys.b_h.clone()) - &sys.a_hs * &z;
    let x_h = if nh == 0 {
        DVector::zeros(0)
    } else {
        schur_lu(s)?.solve(&g).ok_or(Error::SingularSchur)?
    };
    let x_s = z - y * &x_h;
    Ok(SchurSolution { x_s: x_s.iter().copied().collect(), x_h: x_h.iter().copied().collect(), sparse_solves: op.solve_count() })
}

/// Oracle: one sparse LU of the whole reduced matrix (harmonic rows and
/// columns stored densely), bordered by the gauge.
pub fn monolithic_solve(sys: &BlockSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let (ns, nh) = (sys.n_stream(), sys.n_harmonic());
    let extra = usize::from(sys.gauge.is_some());
    let n = ns + nh + extra;
    let mut b = TripletBuilder::new(n, n);
    for (i, j, v) in sys.a_ss.triplets() {
        b.push(i, j, v);
    }
    for i in 0..ns {
        for j in 0..nh {
            b.push(i, ns + j, sys.a_sh[(i, j)]);
            b.push(ns + j, i, sys.a_hs[(j, i)]);
        }
    }
    for i in 0..nh {
        for j in 0..nh {
            b.push(ns + i, ns + j, sys.a_hh[(i, j)]);
        }
    }
    if let Some(c) = &sys.gauge {
        for (i, &v) in c.iter().enumerate() {
            b.push(i, ns + nh, v);
            b.push(ns + nh, i, v);
        }
    }
    let op = factorize(&b.build(), FactorKind::SymmetricIndefinite)?;
    let mut rhs = sys.b_s.clone();
    rhs.extend_from_slice(&sys.b_h);
    rhs.resize(n, 0.0);
    let x = op.solve(&rhs)?;
    Ok((x[..ns].to_vec(), x[ns..ns + nh].to_vec()))
}

/// Cached Schur elimination: `A_SS` is factorized and `A_SS⁻¹ A_SH`
/// precomputed once, so every further solve costs one sparse solve.
pub struct SchurSolver {
    op: FactorizedOperator,
    gauged: bool,
    a_hs: DMatrix<f64>,
    y: DMatrix<f64>,
    s_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    probe_solves: usize,
}

impl SchurSolver {
    pub fn new(sys: &BlockSystem) -> Result<Self> {
        let op = factorize_ss(sys)?;
        let nh = sys.n_harmonic();
        let gauged = sys.gauge.is_some();
        let cols: Vec<Vec<f64>> = (0..nh).map(|j| sys.a_sh.column(j).iter().copied().collect()).collect();
        let y = if nh == 0 {
            DMatrix::zeros(sys.n_stream(), 0)
        } else {
            let sol = solve_ss(&op, gauged, cols)?;
            DMatrix::from_fn(sys.n_stream(), nh, |i, j| sol[j][i])
        };
        let s_lu = if nh == 0 { None } else { Some(schur_lu(&sys.a_hh - &sys.a_hs * &y)?) };
        Ok(SchurSolver { op, gauged, a_hs: sys.a_hs.clone(), y, s_lu, probe_solves: 0 })
    }

    pub fn solve(&self, b_s: &[f64], b_h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let z = DVector::from_vec(solve_ss(&self.op, self.gauged, vec![b_s.to_vec()])?.remove(0));
        let x_h = match &self.s_lu {
            Some(lu) => {
                let g = DVector::from_column_slice(b_h) - &self.a_hs * &z;
                lu.solve(&g).ok_or(Error::SingularSchur)?
            }
            None => DVector::zeros(0),
        };
        let x_s = z - &self.y * &x_h;
        Ok((x_s.iter().copied().collect(), x_h.iter().copied().collect()))
    }

    pub fn sparse_solves(&self) -> usize {
        self.op.solve_count() - self.probe_solves
    }

    /// Estimate of `λ_min/λ_max` of the reduced matrix (on the complement
    /// of the gauged constant) from power and inverse iteration.
    fn eigenvalue_ratio(&mut self, sys: &BlockSystem) -> Result<f64> {
        let (ns, nh) = (sys.n_stream(), sys.n_harmonic());
        let start: Vec<f64> = (0..ns + nh).map(|i| 1.0 + 0.5 * (0.7 * i as f64 + 0.3).sin()).collect();
        let unit = |v: Vec<f64>| {
            let n = norm(&v);
            (v.into_iter().map(|x| x / n).collect::<Vec<f64>>(), n)
        };
        let (mut x, _) = unit(start.clone());
        let mut largest = 0.0;
        for _ in 0..30 {
            let (ys, yh) = sys.apply(&x[..ns], &x[ns..]);
            let (y, n) = unit([ys, yh].concat());
            largest = n;
            x = y;
        }
        let (mut x, _) = unit(start);
        let mut smallest = f64::INFINITY;
        for _ in 0..3 {
            let before = self.op.solve_count();
            let (zs, zh) = self.solve(&x[..ns], &x[ns..])?;
            self.probe_solves += self.op.solve_count() - before;
            let (z, n) = unit([zs, zh].concat());
            if !n.is_finite() || n == 0.0 {
                return Ok(0.0);
            }
            smallest = 1.0 / n;
            x = z;
        }
        Ok(if largest > 0.0 { smallest / largest } else { 0.0 })
    }
}

fn symmetric_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (a + a.transpose())
}

/// Eigenvalues below this fraction of the largest one count as kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-10;

/// Largest reduced system handled by the dense kernel-gauge fallback.
pub const DENSE_FALLBACK_LIMIT: usize = 4000;

/// Dense solve with the reduced operator's numerical kernel (beyond the
/// streamfunction constant) removed by `L²`-orthogonality constraints.
pub struct GaugedSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    n_stream: usize,
    kernel: Vec<Vec<f64>>,
}

impl GaugedSolver {
    /// `mass` is the reduced mass system `TᵀMT` (only its matrix blocks are
    /// used); the kernel threshold is `1e-10·max|eig|`.
    pub fn new(sys: &BlockSystem, mass: &BlockSystem, t: &EmbeddingMatrix) -> Result<Self> {
        let (ns, nh) = (sys.n_stream(), sys.n_harmonic());
        let n = ns + nh;
        if n > DENSE_FALLBACK_LIMIT {
            return Err(Error::SingularOperator(format!(
                "reduced operator is singular and too large ({n}) for the dense kernel fallback"
            )));
        }
        let r = sys.to_dense();
        let g = mass.to_dense();
        let eig = nalgebra::SymmetricEigen::new(symmetric_part(&r));
        let scale = eig.eigenvalues.amax();
        let mut constraints: Vec<DVector<f64>> = Vec::new();
        if let Some(c) = &sys.gauge {
            let mut v = DVector::zeros(n);
            v.rows_mut(0, ns).copy_from_slice(c);
            constraints.push(v);
        }
        let small: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() < KERNEL_THRESHOLD * scale).collect();
        let z = DMatrix::from_fn(n, small.len(), |i, j| eig.eigenvectors[(i, small[j])]);
        // Within the numerical kernel, split off the pure gauge directions
        // (constant ψ, zero velocity) by the eigenvectors of ZᵀGZ.
        let gz = &g * &z;
        let kg = nalgebra::SymmetricEigen::new(symmetric_part(&(z.transpose() * &gz)));
        let mut kernel = Vec::new();
        for (i, &mu) in kg.eigenvalues.iter().enumerate() {
            if mu <= 1e-12 * g.amax() {
                continue;
            }
            let v = &z * kg.eigenvectors.column(i);
            kernel.push(t.apply(&v.as_slice()[..ns], &v.as_slice()[ns..]));
            constraints.push(&g * v);
        }
        let m = constraints.len();
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&r);
        for (j, c) in constraints.iter().enumerate() {
            k.view_mut((0, n + j), (n, 1)).copy_from(c);
            k.view_mut((n + j, 0), (1, n)).copy_from(&c.transpose());
        }
        let sv = k.clone().singular_values();
        if sv.min() < 1e-14 * sv.max() {
            return Err(Error::SingularOperator("kernel constraints do not regularize the reduced operator".into()));
        }
        log::info!("reduced operator has a {}-dimensional kernel of velocity fields; constrained", kernel.len());
        Ok(GaugedSolver { lu: k.lu(), n, n_stream: ns, kernel })
    }

    pub fn solve(&self, b_s: &[f64], b_h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rhs = DVector::zeros(self.lu.l().nrows());
        rhs.rows_mut(0, b_s.len()).copy_from_slice(b_s);
        rhs.rows_mut(b_s.len(), b_h.len()).copy_from_slice(b_h);
        let x = self.lu.solve(&rhs).ok_or(Error::SingularMatrix)?;
        Ok((x.rows(0, self.n_stream).iter().copied().collect(), x.rows(self.n_stream, self.n - self.n_stream).iter().copied().collect()))
    }

    /// BDM coefficients of the detected kernel fields.
    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }
}

/// Schur elimination when `A_SS` and `S_HH` are regular, the dense gauged
/// solve otherwise.
pub enum ReducedSolver {
    Schur(SchurSolver),
    Gauged(GaugedSolver),
}

impl ReducedSolver {
    /// `mass` supplies `TᵀMT` for the kernel constraints if the fallback is
    /// needed; it is built lazily.
    pub fn new(sys: &BlockSystem, t: &EmbeddingMatrix, mass: impl FnOnce() -> Result<BlockSystem>) -> Result<Self> {
        let singular = match SchurSolver::new(sys) {
            Ok(mut s) => {
                let ratio = s.eigenvalue_ratio(sys)?;
                if ratio >= KERNEL_THRESHOLD {
                    return Ok(ReducedSolver::Schur(s));
                }
                format!("eigenvalue ratio {ratio:e}")
            }
            Err(e @ (Error::SingularMatrix | Error::NotSpd | Error::SingularSchur | Error::SolverFailure(_))) => e.to_string(),
            Err(e) => return Err(e),
        };
        log::warn!("reduced operator is singular ({singular}); detecting its kernel");
        Ok(ReducedSolver::Gauged(GaugedSolver::new(sys, &mass()?, t)?))
    }

    pub fn solve(&self, b_s: &[f64], b_h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            ReducedSolver::Schur(s) => s.solve(b_s, b_h),
            ReducedSolver::Gauged(g) => g.solve(b_s, b_h),
        }
    }

    pub fn is_gauged(&self) -> bool {
        matches!(self, ReducedSolver::Gauged(_))
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        match self {
            ReducedSolver::Schur(_) => &[],
            ReducedSolver::Gauged(g) => g.kernel(),
        }
    }
}
