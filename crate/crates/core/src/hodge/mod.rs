//! Helmholtz projection, harmonic bases and three-way decompositions of
//! BDM fields.
//!
//! All operators live on one [`HodgeContext`]: the streamfunction space
//! `S^{k+1}_0` (zero mean on closed surfaces, zero trace otherwise), the
//! velocity space `BDM^k_0` and the zero-mean pressure space. The gradient
//! complement `div*λ` is never assembled; it is the remainder of the mixed
//! projection.

mod dimension;
mod harmonic;
mod incomplete;

pub use dimension::{verify_dimension, DimensionReport};
pub use harmonic::{harmonic_basis, BasisReport, HarmonicBasis, DEFAULT_TOL};
pub use incomplete::{decompose_p0_incomplete, IncompleteDecomposition};

use std::sync::{Arc, OnceLock};

use crate::assembly::{assemble_div, assemble_mass, assemble_rot_embedding, pressure_degree, scalar_integrals};
use crate::error::{Error, Result};
use crate::fespace::{Constraint, FeField, FeSpace, SpaceKind};
use crate::linalg::{factorize, m_inner, FactorKind, FactorizedOperator, SparseMatrix};
use crate::mesh::{analyze_topology, SurfaceMesh, TopologySummary};

/// Spaces, assembled operators and lazily factorized solvers for one mesh
/// and degree.
pub struct HodgeContext {
    mesh: Arc<SurfaceMesh>,
    topology: TopologySummary,
    k: usize,
    stream: Arc<FeSpace>,
    velocity: Arc<FeSpace>,
    pressure: Arc<FeSpace>,
    mass: SparseMatrix,
    div: SparseMatrix,
    rot: SparseMatrix,
    pressure_mean: Vec<f64>,
    stream_mean: Option<Vec<f64>>,
    mixed: OnceLock<FactorizedOperator>,
    laplace: OnceLock<FactorizedOperator>,
}

impl std::fmt::Debug for HodgeContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HodgeContext")
            .field("k", &self.k)
            .field("b1", &self.topology.b1)
            .field("n_stream", &self.stream.total_dofs())
            .field("n_velocity", &self.velocity.total_dofs())
            .finish()
    }
}

fn cached(cell: &OnceLock<FactorizedOperator>, build: impl FnOnce() -> Result<FactorizedOperator>) -> Result<&FactorizedOperator> {
    if let Some(f) = cell.get() {
        return Ok(f);
    }
    let f = build()?;
    Ok(cell.get_or_init(|| f))
}

impl HodgeContext {
    pub fn new(mesh: &Arc<SurfaceMesh>, k: usize) -> Result<Self> {
        mesh.require_connected()?;
        let topology = analyze_topology(mesh);
        let sc = if mesh.has_boundary() { Constraint::ZeroBoundaryTrace } else { Constraint::ZeroMean };
        let stream = Arc::new(FeSpace::new(mesh, SpaceKind::Lagrange, k + 1, sc)?);
        let velocity = Arc::new(FeSpace::new(mesh, SpaceKind::Bdm, k, Constraint::ZeroNormalTrace)?);
        let pressure = Arc::new(FeSpace::new(mesh, SpaceKind::DgPressure, pressure_degree(k), Constraint::ZeroMean)?);
        let mass = assemble_mass(&velocity)?;
        let div = assemble_div(&velocity, &pressure)?;
        let rot = assemble_rot_embedding(&stream, &velocity)?;
        let pressure_mean = scalar_integrals(&pressure)?;
        let stream_mean = if sc == Constraint::ZeroMean { Some(scalar_integrals(&stream)?) } else { None };
        Ok(HodgeContext {
            mesh: mesh.clone(),
            topology,
            k,
            stream,
            velocity,
            pressure,
            mass,
            div,
            rot,
            pressure_mean,
            stream_mean,
            mixed: OnceLock::new(),
            laplace: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn topology(&self) -> &TopologySummary {
        &self.topology
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn b1(&self) -> usize {
        self.topology.b1
    }

    pub fn stream_space(&self) -> &Arc<FeSpace> {
        &self.stream
    }

    pub fn velocity_space(&self) -> &Arc<FeSpace> {
        &self.velocity
    }

    pub fn pressure_space(&self) -> &Arc<FeSpace> {
        &self.pressure
    }

    /// BDM mass matrix `M`.
    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    /// `B[i, j] = (div φ_j, q_i)`.
    pub fn div(&self) -> &SparseMatrix {
        &self.div
    }

    /// Streamfunction block `E` of the embedding (`rot` in BDM coefficients).
    pub fn rot(&self) -> &SparseMatrix {
        &self.rot
    }

    /// `∫ q_i`, the functional fixing the pressure gauge.
    pub fn pressure_mean(&self) -> &[f64] {
        &self.pressure_mean
    }

    /// `∫ φ_i` on closed surfaces, where streamfunctions are mean-free.
    pub fn stream_mean(&self) -> Option<&[f64]> {
        self.stream_mean.as_deref()
    }

    /// Factorization of `[M Bᵀ 0; B 0 c; 0 cᵀ 0]`.
    pub fn mixed_operator(&self) -> Result<&FactorizedOperator> {
        cached(&self.mixed, || {
            let s = SparseMatrix::saddle_point(&self.mass, &self.div, Some(&self.pressure_mean))?;
            factorize(&s, FactorKind::SymmetricIndefinite)
        })
    }

    /// Factorization of `EᵀME`, bordered by the mean functional on closed
    /// surfaces.
    pub fn stream_operator(&self) -> Result<&FactorizedOperator> {
        cached(&self.laplace, || {
            let l = self.mass.congruence(&self.rot)?;
            let l = symmetrized(&l);
            match &self.stream_mean {
                Some(c) => factorize(&l.bordered(c), FactorKind::SymmetricIndefinite),
                None => factorize(&l, FactorKind::Spd),
            }
        })
    }

    /// Mixed projection for the load `ℓ_i = (r, φ_i)`: returns `u ∈ J^k_BDM`
    /// and the zero-mean multiplier `λ` with `Mu + Bᵀλ = ℓ`, `Bu = 0`.
    pub fn project_load(&self, load: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.velocity.total_dofs();
        let m = self.pressure.total_dofs();
        if load.len() != n {
            return Err(Error::DimensionMismatch(format!("load of length {} for {n} velocity dofs", load.len())));
        }
        let mut rhs = vec![0.0; n + m + 1];
        rhs[..n].copy_from_slice(load);
        let x = self.mixed_operator()?.solve(&rhs)?;
        Ok((x[..n].to_vec(), x[n..n + m].to_vec()))
    }

    /// Streamfunction `ψ` with `(rot ψ, rot φ) = ℓ(rot φ)` for all `φ`, where
    /// `ℓ` is given by its values on the BDM basis.
    pub fn stream_function_load(&self, load: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = self.rot.tr_mul_vec(load);
        let ns = rhs.len();
        if self.stream_mean.is_some() {
            rhs.push(0.0);
        }
        let mut x = self.stream_operator()?.solve(&rhs)?;
        x.truncate(ns);
        Ok(x)
    }

    /// Streamfunction of the `L²`-projection of a BDM field onto
    /// `rot(S^{k+1}_0)`.
    pub fn stream_function(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.stream_function_load(&self.mass.mul_vec(coeffs))
    }

    pub fn norm(&self, coeffs: &[f64]) -> f64 {
        m_inner(&self.mass, coeffs, coeffs).sqrt()
    }

    pub(crate) fn check_velocity(&self, v: &FeField) -> Result<()> {
        let s = v.space();
        let same = Arc::ptr_eq(s, &self.velocity)
            || (s.same_mesh(&self.velocity)
                && s.kind() == SpaceKind::Bdm
                && s.degree() == self.k
                && s.constraint() == Constraint::ZeroNormalTrace);
        if same {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "field lives in {:?}({}) with {:?}, expected BDM({}) with zero normal trace on this mesh",
                s.kind(),
                s.degree(),
                s.constraint(),
                self.k
            )))
        }
    }
}

pub(crate) fn symmetrized(a: &SparseMatrix) -> SparseMatrix {
    a.add_scaled(&a.transpose(), 1.0).scale(0.5).mark_symmetric()
}

/// Result of [`helmholtz_project`].
#[derive(Debug, Clone)]
pub struct HelmholtzSplit {
    /// `Π_J r`.
    pub u: FeField,
    /// Zero-mean multiplier; `r − u = div*λ`.
    pub lambda: FeField,
}

/// `L²`-projection of a BDM field onto the discretely divergence-free
/// subspace via the mixed system.
pub fn helmholtz_project(ctx: &HodgeContext, r: &FeField) -> Result<HelmholtzSplit> {
    ctx.check_velocity(r)?;
    helmholtz_project_load(ctx, &ctx.mass.mul_vec(r.coefficients()))
}

/// As [`helmholtz_project`] for an input given by its moments
/// `ℓ_i = (r, φ_i)`, e.g. a broken polynomial field.
pub fn helmholtz_project_load(ctx: &HodgeContext, load: &[f64]) -> Result<HelmholtzSplit> {
    let (u, lambda) = ctx.project_load(load)?;
    Ok(HelmholtzSplit {
        u: FeField::new(ctx.velocity.clone(), u)?,
        lambda: FeField::new(ctx.pressure.clone(), lambda)?,
    })
}

/// `v = rot ψ + Σ hᵢ 𝐡ᵢ + div*λ` with the parts as BDM coefficient vectors.
#[derive(Debug, Clone)]
pub struct HodgeComponents {
    pub psi: FeField,
    pub h_coeffs: Vec<f64>,
    pub lambda: FeField,
    pub rot_part: Vec<f64>,
    pub harmonic_part: Vec<f64>,
    pub gradient_part: Vec<f64>,
    /// `‖v − rot ψ − Σ hᵢ 𝐡ᵢ − div*λ‖_{L²}`.
    pub residual_norm: f64,
}

pub fn decompose(ctx: &HodgeContext, v: &FeField, basis: &HarmonicBasis) -> Result<HodgeComponents> {
    ctx.check_velocity(v)?;
    basis.check(ctx)?;
    let c = v.coefficients();
    let mv = ctx.mass.mul_vec(c);
    let psi = ctx.stream_function_load(&mv)?;
    let h_coeffs: Vec<f64> = basis.vectors.iter().map(|h| crate::linalg::dot(h, &mv)).collect();
    let (u, lambda) = ctx.project_load(&mv)?;
    let rot_part = ctx.rot.mul_vec(&psi);
    let mut harmonic_part = vec![0.0; c.len()];
    for (h, &a) in basis.vectors.iter().zip(&h_coeffs) {
        crate::linalg::axpy(&mut harmonic_part, a, h);
    }
    let gradient_part: Vec<f64> = c.iter().zip(&u).map(|(a, b)| a - b).collect();
    let residual: Vec<f64> = (0..c.len()).map(|i| c[i] - rot_part[i] - harmonic_part[i] - gradient_part[i]).collect();
    Ok(HodgeComponents {
        psi: FeField::new(ctx.stream.clone(), psi)?,
        h_coeffs,
        lambda: FeField::new(ctx.pressure.clone(), lambda)?,
        residual_norm: ctx.norm(&residual),
        rot_part,
        harmonic_part,
        gradient_part,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm};
    use crate::mesh::shapes;
    use rand::{RngExt, SeedableRng};

    fn random(n: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn projection_keeps_rot_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for mesh in [Arc::new(shapes::torus(3, 3, 1.0, 0.4)), Arc::new(shapes::sphere_with_holes(1, 2))] {
            for k in 0..=2 {
                let ctx = HodgeContext::new(&mesh, k).unwrap();
                let psi = random(ctx.stream_space().total_dofs(), &mut rng);
                let r = FeField::new(ctx.velocity_space().clone(), ctx.rot().mul_vec(&psi)).unwrap();
                let split = helmholtz_project(&ctx, &r).unwrap();
                let scale = ctx.norm(r.coefficients());
                let diff: Vec<f64> = split.u.coefficients().iter().zip(r.coefficients()).map(|(a, b)| a - b).collect();
                assert!(ctx.norm(&diff) <= 1e-10 * scale);
                assert!(norm(split.lambda.coefficients()) <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn projection_of_random_field_is_divergence_free_and_idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mesh = Arc::new(shapes::torus(3, 3, 1.0, 0.4));
        let ctx = HodgeContext::new(&mesh, 1).unwrap();
        let r = FeField::new(ctx.velocity_space().clone(), random(ctx.velocity_space().total_dofs(), &mut rng)).unwrap();
        let split = helmholtz_project(&ctx, &r).unwrap();
        let u = split.u.coefficients();
        let (div, un) = crate::assembly::divergence_norm(ctx.velocity_space(), u);
        assert!(div <= 1e-10 * un, "{div}");
        // (u, div*q) = (div u, q) = 0 for every q.
        assert!(norm(&ctx.div().mul_vec(u)) <= 1e-10 * un);
        let again = helmholtz_project(&ctx, &split.u).unwrap();
        let d: Vec<f64> = again.u.coefficients().iter().zip(u).map(|(a, b)| a - b).collect();
        assert!(ctx.norm(&d) <= 1e-12 * un);
        assert!(dot(&ctx.pressure_mean, split.lambda.coefficients()).abs() < 1e-12);
    }

    #[test]
    fn decomposition_of_random_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for mesh in [Arc::new(shapes::torus(3, 4, 1.0, 0.4)), Arc::new(shapes::sphere_with_holes(1, 3))] {
            for k in 0..=2 {
                let ctx = HodgeContext::new(&mesh, k).unwrap();
                let basis = ctx.harmonic_basis(7, DEFAULT_TOL).unwrap();
                let v = FeField::new(ctx.velocity_space().clone(), random(ctx.velocity_space().total_dofs(), &mut rng)).unwrap();
                let d = decompose(&ctx, &v, &basis).unwrap();
                let vn2 = m_inner(ctx.mass(), v.coefficients(), v.coefficients());
                assert!(d.residual_norm <= 1e-10 * vn2.sqrt(), "k={k}: {}", d.residual_norm);
                let parts = [&d.rot_part, &d.harmonic_part, &d.gradient_part];
                for i in 0..3 {
                    for j in i + 1..3 {
                        assert!(m_inner(ctx.mass(), parts[i], parts[j]).abs() <= 1e-10 * vn2, "k={k} ({i},{j})");
                    }
                }
                let sum: f64 = parts.iter().map(|p| m_inner(ctx.mass(), p, p)).sum();
                assert!((sum - vn2).abs() <= 1e-10 * vn2);
            }
        }
    }

    #[test]
    fn decomposing_pure_components() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mesh = Arc::new(shapes::torus(4, 3, 1.0, 0.4));
        let ctx = HodgeContext::new(&mesh, 1).unwrap();
        let basis = ctx.harmonic_basis(1, DEFAULT_TOL).unwrap();
        // rot ψ₀ with mean-free ψ₀.
        let mut psi0 = random(ctx.stream_space().total_dofs(), &mut rng);
        let c = ctx.stream_mean().unwrap();
        let shift = dot(c, &psi0) / c.iter().sum::<f64>();
        psi0.iter_mut().for_each(|x| *x -= shift);
        let v = FeField::new(ctx.velocity_space().clone(), ctx.rot().mul_vec(&psi0)).unwrap();
        let d = decompose(&ctx, &v, &basis).unwrap();
        let scale = norm(&psi0);
        assert!(d.psi.coefficients().iter().zip(&psi0).all(|(a, b)| (a - b).abs() <= 1e-9 * scale));
        assert!(d.h_coeffs.iter().all(|h| h.abs() < 1e-10 * scale));
        assert!(norm(d.lambda.coefficients()) < 1e-10 * scale);

        let v = FeField::new(ctx.velocity_space().clone(), basis.vectors[0].clone()).unwrap();
        let d = decompose(&ctx, &v, &basis).unwrap();
        assert!((d.h_coeffs[0] - 1.0).abs() < 1e-10 && d.h_coeffs[1].abs() < 1e-10);
        assert!(ctx.norm(&d.rot_part) < 1e-10);
        assert!(norm(d.lambda.coefficients()) < 1e-10);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let mesh = Arc::new(shapes::torus(3, 3, 1.0, 0.4));
        let ctx = HodgeContext::new(&mesh, 1).unwrap();
        let other = HodgeContext::new(&mesh, 2).unwrap();
        let basis = other.harmonic_basis(1, DEFAULT_TOL).unwrap();
        let v = FeField::zeros(ctx.velocity_space().clone());
        assert!(matches!(decompose(&ctx, &v, &basis), Err(Error::BasisMismatch(_))));
        let w = FeField::zeros(other.velocity_space().clone());
        assert!(matches!(helmholtz_project(&ctx, &w), Err(Error::DimensionMismatch(_))));
    }
}
