//! Global sparse operators.
//!
//! Element matrices are computed from reference tabulations and scattered
//! with the orientation signs of the dof map (already folded into the
//! evaluated basis). Elements are visited in index order, so assembled
//! matrices do not depend on thread scheduling.

mod convection;
mod rot;
mod sip;

pub use convection::{assemble_convection, convection_energy, divergence_norm};
pub use rot::assemble_rot_embedding;
pub use sip::{assemble_sip, default_penalty, BoundaryCondition, SipParameters};

use crate::error::{Error, Result};
use crate::fespace::{FeSpace, Reference, SpaceKind, VectorSample, VectorValue};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Vec3;
use crate::quadrature::{EdgeRule, QuadratureRule};

/// Reference samples of a vector space on a fixed triangle rule.
pub(crate) struct VectorTab {
    pub rule: QuadratureRule,
    pub samples: Vec<Vec<VectorSample>>,
}

impl VectorTab {
    pub fn new(space: &FeSpace, degree: usize) -> Self {
        let r = space.vector_reference().expect("vector space");
        let rule = QuadratureRule::triangle(degree);
        let samples = rule.points.iter().map(|p| r.eval(p[1], p[2])).collect();
        VectorTab { rule, samples }
    }
}

/// Reference samples of a scalar space on a fixed triangle rule.
pub(crate) struct ScalarTab {
    pub rule: QuadratureRule,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

impl ScalarTab {
    pub fn new(space: &FeSpace, degree: usize) -> Self {
        let r = space.scalar_reference().expect("scalar space");
        let rule = QuadratureRule::triangle(degree);
        let (values, grads) = rule.points.iter().map(|p| r.eval(p[1], p[2])).unzip();
        ScalarTab { rule, values, grads }
    }
}

/// Adds a dense local block `k[i][j]` for rows `rows` and columns `cols`
/// (global indices, `None` skipped).
pub(crate) fn scatter(b: &mut TripletBuilder, rows: &[Option<usize>], cols: &[Option<usize>], k: &[Vec<f64>]) {
    for (i, r) in rows.iter().enumerate() {
        let Some(r) = r else { continue };
        for (j, c) in cols.iter().enumerate() {
            let Some(c) = c else { continue };
            if k[i][j] != 0.0 {
                b.push(*r, *c, k[i][j]);
            }
        }
    }
}

pub(crate) fn globals(space: &FeSpace, t: usize) -> Vec<Option<usize>> {
    space.local_dofs(t).iter().map(|d| d.global).collect()
}

/// Reference point on local edge `l` of triangle `t` at parameter `s`
/// measured along the edge tangent `τ`.
pub(crate) fn edge_point(space: &FeSpace, t: usize, l: usize, s: f64) -> (f64, f64) {
    let (a, d) = crate::fespace::reference::edge_geometry(l);
    let sl = if space.mesh().local_edge_along_tau(t, l) { s } else { 1.0 - s };
    (a[0] + sl * d[0], a[1] + sl * d[1])
}

pub(crate) fn edge_rule(k: usize) -> EdgeRule {
    EdgeRule::new(2 * k + 2)
}

/// Quadrature degree used for triangle integrals of a space of degree `k`.
pub(crate) fn triangle_degree(k: usize) -> usize {
    2 * k + 3
}

/// Gram matrix of the space's basis in `L²(M_h)`.
pub fn assemble_mass(space: &FeSpace) -> Result<SparseMatrix> {
    let n = space.total_dofs();
    let mut b = TripletBuilder::new(n, n);
    let nl = space.n_local();
    match space.reference() {
        Reference::Scalar(_) => {
            let tab = ScalarTab::new(space, triangle_degree(space.degree()));
            for t in 0..space.mesh().n_triangles() {
                let det = space.geometry(t).det;
                let mut k = vec![vec![0.0; nl]; nl];
                for (q, &w) in tab.rule.weights.iter().enumerate() {
                    let (v, _) = space.map_scalar(t, &tab.values[q], &tab.grads[q]);
                    for i in 0..nl {
                        for j in 0..nl {
                            k[i][j] += w * det * v[i] * v[j];
                        }
                    }
                }
                let g = globals(space, t);
                scatter(&mut b, &g, &g, &k);
            }
        }
        Reference::Vector(_) => {
            let tab = VectorTab::new(space, triangle_degree(space.degree()));
            for t in 0..space.mesh().n_triangles() {
                let det = space.geometry(t).det;
                let mut k = vec![vec![0.0; nl]; nl];
                for (q, &w) in tab.rule.weights.iter().enumerate() {
                    let v = space.map_vector(t, &tab.samples[q]);
                    for i in 0..nl {
                        for j in 0..nl {
                            k[i][j] += w * det * v[i].value.dot(&v[j].value);
                        }
                    }
                }
                let g = globals(space, t);
                scatter(&mut b, &g, &g, &k);
            }
        }
        Reference::Facet => return Err(Error::UnsupportedCombination("facet spaces have no mass matrix".into())),
    }
    Ok(b.build().mark_symmetric())
}

/// Pressure degree paired with BDM of degree `k`.
pub fn pressure_degree(k: usize) -> usize {
    k.saturating_sub(1)
}

/// `B[i, j] = (div v_j, q_i)`.
pub fn assemble_div(v: &FeSpace, q: &FeSpace) -> Result<SparseMatrix> {
    if v.kind() != SpaceKind::Bdm || q.kind() != SpaceKind::DgPressure {
        return Err(Error::UnsupportedCombination("divergence needs a BDM and a DG pressure space".into()));
    }
    if q.degree() != pressure_degree(v.degree()) {
        return Err(Error::DegreeMismatch(format!(
            "BDM({}) pairs with pressure degree {}, got {}",
            v.degree(),
            pressure_degree(v.degree()),
            q.degree()
        )));
    }
    if !v.same_mesh(q) {
        return Err(Error::DimensionMismatch("spaces live on different meshes".into()));
    }
    let deg = triangle_degree(v.degree());
    let vt = VectorTab::new(v, deg);
    let qt = ScalarTab::new(q, deg);
    let mut b = TripletBuilder::new(q.total_dofs(), v.total_dofs());
    for t in 0..v.mesh().n_triangles() {
        let det = v.geometry(t).det;
        let mut k = vec![vec![0.0; v.n_local()]; q.n_local()];
        for (qi, &w) in vt.rule.weights.iter().enumerate() {
            let vv = v.map_vector(t, &vt.samples[qi]);
            let (qq, _) = q.map_scalar(t, &qt.values[qi], &qt.grads[qi]);
            for (i, qv) in qq.iter().enumerate() {
                for (j, b) in vv.iter().enumerate() {
                    k[i][j] += w * det * qv * b.divergence;
                }
            }
        }
        scatter(&mut b, &globals(q, t), &globals(v, t), &k);
    }
    Ok(b.build())
}

/// `∫ f·v_i` for a vector space; `f` is projected onto each triangle's
/// tangent plane before integration.
pub fn assemble_load(space: &FeSpace, f: impl Fn(Vec3) -> Vec3) -> Result<Vec<f64>> {
    if space.vector_reference().is_none() {
        return Err(Error::UnsupportedCombination("vector load needs a vector space".into()));
    }
    let tab = VectorTab::new(space, triangle_degree(space.degree()) + 1);
    let mut out = vec![0.0; space.total_dofs()];
    for t in 0..space.mesh().n_triangles() {
        let geo = space.geometry(t);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let p = tab.rule.points[q];
            let ft = geo.tangential(&f(geo.map(p[1], p[2])));
            let v = space.map_vector(t, &tab.samples[q]);
            for (d, b) in space.local_dofs(t).iter().zip(&v) {
                if let Some(g) = d.global {
                    out[g] += w * geo.det * ft.dot(&b.value);
                }
            }
        }
    }
    Ok(out)
}

/// `∫ g φ_i` for a scalar space.
pub fn assemble_scalar_load(space: &FeSpace, g: impl Fn(Vec3) -> f64) -> Result<Vec<f64>> {
    if space.scalar_reference().is_none() {
        return Err(Error::UnsupportedCombination("scalar load needs a scalar space".into()));
    }
    let tab = ScalarTab::new(space, triangle_degree(space.degree()) + 1);
    let mut out = vec![0.0; space.total_dofs()];
    for t in 0..space.mesh().n_triangles() {
        let geo = space.geometry(t);
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let p = tab.rule.points[q];
            let gv = g(geo.map(p[1], p[2]));
            let (v, _) = space.map_scalar(t, &tab.values[q], &tab.grads[q]);
            for (d, b) in space.local_dofs(t).iter().zip(&v) {
                if let Some(i) = d.global {
                    out[i] += w * geo.det * gv * b;
                }
            }
        }
    }
    Ok(out)
}

/// `∫ φ_i` for a scalar space (the mean-value functional).
pub fn scalar_integrals(space: &FeSpace) -> Result<Vec<f64>> {
    assemble_scalar_load(space, |_| 1.0)
}

/// Values of a vector field given by coefficients at the quadrature points
/// of a tabulation, for triangle `t`.
pub(crate) fn field_at(coeffs: &[f64], space: &FeSpace, t: usize, vals: &[VectorValue]) -> (Vec3, nalgebra::Matrix3<f64>) {
    let mut v = Vec3::zeros();
    let mut g = nalgebra::Matrix3::zeros();
    for (d, b) in space.local_dofs(t).iter().zip(vals) {
        if let Some(i) = d.global {
            v += coeffs[i] * b.value;
            g += coeffs[i] * b.gradient;
        }
    }
    (v, g)
}
