use std::sync::Arc;

use super::{HarmonicBasis, HodgeContext};
use crate::assembly::scalar_integrals;
use crate::error::{Error, Result};
use crate::fespace::{Constraint, FeField, FeSpace, SpaceKind};
use crate::linalg::{factorize, FactorKind, TripletBuilder};
use crate::mesh::Vec3;

/// Projections of a piecewise constant tangential field onto `rot(S¹₀)`,
/// `H⁰_BDM` and `grad_h(CR¹)`, as per-triangle vectors.
#[derive(Debug, Clone)]
pub struct IncompleteDecomposition {
    pub psi: FeField,
    pub h_coeffs: Vec<f64>,
    /// Zero-mean Crouzeix–Raviart potential.
    pub phi: FeField,
    pub rot_part: Vec<Vec3>,
    pub harmonic_part: Vec<Vec3>,
    pub gradient_part: Vec<Vec3>,
    pub remainder: Vec<Vec3>,
    /// `‖remainder‖_{L²}`.
    pub residual_norm: f64,
}

/// `k = 0` decomposition of a broken `P⁰` field with one tangential vector per
/// triangle (normal components are dropped).
///
/// Divergence-free lowest-order fields are piecewise constant, so all three
/// parts live in `P⁰`. On flat simply connected patches they span it.
pub fn decompose_p0_incomplete(ctx: &HodgeContext, basis: &HarmonicBasis, v: &[Vec3]) -> Result<IncompleteDecomposition> {
    if ctx.k() != 0 {
        return Err(Error::WrongDegree(format!("the incomplete decomposition needs k = 0, got {}", ctx.k())));
    }
    basis.check(ctx)?;
    let mesh = ctx.mesh();
    let nt = mesh.n_triangles();
    if v.len() != nt {
        return Err(Error::DimensionMismatch(format!("{} vectors for {nt} triangles", v.len())));
    }
    let v: Vec<Vec3> = (0..nt).map(|t| ctx.velocity_space().geometry(t).tangential(&v[t])).collect();
    let area: Vec<f64> = (0..nt).map(|t| mesh.area(t)).collect();
    let centroid = 1.0 / 3.0;

    // Moments (v, φ_i) against the RT basis; the basis is affine, so the
    // centroid value times the area is exact.
    let vs = ctx.velocity_space();
    let mut load = vec![0.0; vs.total_dofs()];
    for t in 0..nt {
        for (d, b) in vs.local_dofs(t).iter().zip(vs.eval_vector(t, centroid, centroid)) {
            if let Some(i) = d.global {
                load[i] += area[t] * v[t].dot(&b.value);
            }
        }
    }
    let psi = ctx.stream_function_load(&load)?;
    let h_coeffs: Vec<f64> = basis.vectors.iter().map(|h| crate::linalg::dot(h, &load)).collect();

    let s = ctx.stream_space();
    let psi_field = FeField::new(s.clone(), psi)?;
    let mut harmonic_coeffs = vec![0.0; vs.total_dofs()];
    for (h, &a) in basis.vectors.iter().zip(&h_coeffs) {
        crate::linalg::axpy(&mut harmonic_coeffs, a, h);
    }
    let harmonic = FeField::new(vs.clone(), harmonic_coeffs)?;

    let cr = Arc::new(FeSpace::new(mesh, SpaceKind::CrouzeixRaviart, 1, Constraint::ZeroMean)?);
    let phi = cr_gradient_projection(&cr, &v, &area)?;

    let mut rot_part = Vec::with_capacity(nt);
    let mut harmonic_part = Vec::with_capacity(nt);
    let mut gradient_part = Vec::with_capacity(nt);
    let mut remainder = Vec::with_capacity(nt);
    let mut r2 = 0.0;
    for t in 0..nt {
        let rot = broken_gradient(s, psi_field.coefficients(), t).cross(&mesh.normal(t));
        let h = harmonic.value_vector(t, centroid, centroid);
        let g = broken_gradient(&cr, phi.coefficients(), t);
        let r = v[t] - rot - h - g;
        r2 += area[t] * r.norm_squared();
        rot_part.push(rot);
        harmonic_part.push(h);
        gradient_part.push(g);
        remainder.push(r);
    }
    Ok(IncompleteDecomposition {
        psi: psi_field,
        h_coeffs,
        phi,
        rot_part,
        harmonic_part,
        gradient_part,
        remainder,
        residual_norm: r2.sqrt(),
    })
}

/// Element gradient of a piecewise linear field (constant per triangle).
fn broken_gradient(space: &FeSpace, coeffs: &[f64], t: usize) -> Vec3 {
    let (_, grads) = space.eval_scalar(t, 1.0 / 3.0, 1.0 / 3.0);
    space
        .local_dofs(t)
        .iter()
        .zip(&grads)
        .filter_map(|(d, g)| d.global.map(|i| coeffs[i] * g))
        .sum()
}

/// Zero-mean `φ ∈ CR¹` with `(∇_h φ, ∇_h χ) = (v, ∇_h χ)` for all `χ`.
fn cr_gradient_projection(cr: &Arc<FeSpace>, v: &[Vec3], area: &[f64]) -> Result<FeField> {
    let n = cr.total_dofs();
    let mut k = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n + 1];
    for t in 0..v.len() {
        let (_, grads) = cr.eval_scalar(t, 1.0 / 3.0, 1.0 / 3.0);
        let dofs = cr.local_dofs(t);
        for (a, da) in dofs.iter().enumerate() {
            let Some(i) = da.global else { continue };
            rhs[i] += area[t] * v[t].dot(&grads[a]);
            for (b, db) in dofs.iter().enumerate() {
                if let Some(j) = db.global {
                    k.push(i, j, area[t] * grads[a].dot(&grads[b]));
                }
            }
        }
    }
    let mean = scalar_integrals(cr)?;
    let op = factorize(&k.build().mark_symmetric().bordered(&mean), FactorKind::SymmetricIndefinite)?;
    let mut x = op.solve(&rhs)?;
    x.truncate(n);
    FeField::new(cr.clone(), x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hodge::DEFAULT_TOL;
    use crate::mesh::{analyze_topology, shapes};
    use rand::{RngExt, SeedableRng};

    fn random_field(mesh: &crate::mesh::SurfaceMesh, seed: u64) -> Vec<Vec3> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..mesh.n_triangles())
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn l2(mesh: &crate::mesh::SurfaceMesh, a: &[Vec3], b: &[Vec3]) -> f64 {
        (0..mesh.n_triangles()).map(|t| mesh.area(t) * a[t].dot(&b[t])).sum()
    }

    #[test]
    fn flat_square_is_complete() {
        let mesh = Arc::new(shapes::flat_grid(1, 1));
        let topo = analyze_topology(&mesh);
        // 2|T| = |V_I| + |E| − 1: 4 = 0 + 4.
        assert_eq!(2 * topo.n_triangles, topo.n_interior_vertices + topo.n_edges - 1);
        let ctx = HodgeContext::new(&mesh, 0).unwrap();
        let basis = ctx.harmonic_basis(0, DEFAULT_TOL).unwrap();
        let v = random_field(&mesh, 1);
        let d = decompose_p0_incomplete(&ctx, &basis, &v).unwrap();
        assert!(d.residual_norm < 1e-12, "{}", d.residual_norm);
    }

    #[test]
    fn larger_flat_patch_is_complete() {
        let mesh = Arc::new(shapes::flat_grid(4, 3));
        let ctx = HodgeContext::new(&mesh, 0).unwrap();
        let basis = ctx.harmonic_basis(0, DEFAULT_TOL).unwrap();
        let d = decompose_p0_incomplete(&ctx, &basis, &random_field(&mesh, 4)).unwrap();
        assert!(d.residual_norm < 1e-12, "{}", d.residual_norm);
        assert!(l2(&mesh, &d.rot_part, &d.gradient_part).abs() < 1e-12);
    }

    #[test]
    fn gradient_of_cr_hat() {
        let mesh = Arc::new(shapes::flat_grid(2, 2));
        let ctx = HodgeContext::new(&mesh, 0).unwrap();
        let basis = ctx.harmonic_basis(0, DEFAULT_TOL).unwrap();
        let cr = FeSpace::new(&mesh, SpaceKind::CrouzeixRaviart, 1, Constraint::ZeroMean).unwrap();
        let mut hat = vec![0.0; cr.total_dofs()];
        // An interior edge.
        let e = mesh.edges().iter().position(|e| !e.is_boundary()).unwrap();
        hat[e] = 1.0;
        let v: Vec<Vec3> = (0..mesh.n_triangles()).map(|t| broken_gradient(&cr, &hat, t)).collect();
        let d = decompose_p0_incomplete(&ctx, &basis, &v).unwrap();
        assert!(d.psi.coefficients().iter().all(|x| x.abs() < 1e-12));
        // φ equals the hat up to a constant.
        let shift = d.phi.coefficients()[e] - 1.0;
        for (i, p) in d.phi.coefficients().iter().enumerate() {
            assert!((p - shift - hat[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_parts_are_orthogonal_and_span() {
        let mesh = Arc::new(shapes::torus(4, 3, 1.0, 0.4));
        let ctx = HodgeContext::new(&mesh, 0).unwrap();
        let basis = ctx.harmonic_basis(2, DEFAULT_TOL).unwrap();
        let v = random_field(&mesh, 9);
        let d = decompose_p0_incomplete(&ctx, &basis, &v).unwrap();
        let vn = l2(&mesh, &v, &v);
        let parts = [&d.rot_part, &d.harmonic_part, &d.gradient_part];
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(l2(&mesh, parts[i], parts[j]).abs() < 1e-10 * vn, "({i},{j})");
            }
        }
        let topo = analyze_topology(&mesh);
        assert_eq!(topo.n_vertices - 1 + 2 + topo.n_edges - 1, 2 * topo.n_triangles);
        assert!(d.residual_norm < 1e-10 * vn.sqrt(), "{}", d.residual_norm);
    }

    #[test]
    fn rejects_higher_degree() {
        let mesh = Arc::new(shapes::flat_grid(1, 1));
        let ctx = HodgeContext::new(&mesh, 1).unwrap();
        let basis = HarmonicBasis::empty(&ctx);
        assert!(matches!(
            decompose_p0_incomplete(&ctx, &basis, &[Vec3::x(), Vec3::y()]),
            Err(Error::WrongDegree(_))
        ));
    }
}
