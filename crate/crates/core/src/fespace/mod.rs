//! Discrete function spaces on a [`SurfaceMesh`].
//!
//! Global dof layout before constraints are applied:
//!
//! * Lagrange of degree `m`: vertices `0..|𝒱|`, then `m − 1` nodes per edge
//!   ordered along `τ`, then the interior nodes of each triangle.
//! * BDM of degree `k`: `k + 1` edge moments per edge (moment `j` is
//!   `∫_E u·ν₁ L_j(s) ds` with `s` running along `τ` and `L_j` the shifted
//!   Legendre polynomial), then the interior moments of each triangle.
//! * DG pressure: a block of `L²(T̂)`-orthonormal polynomials per triangle.
//! * Crouzeix–Raviart: one dof per edge (value at the midpoint).
//! * Facet: `k + 1` dofs per edge.
//!
//! Constraints that remove dofs (`ZeroBoundaryTrace`, `ZeroNormalTrace`)
//! compress this numbering keeping the relative order. `ZeroMean` is only
//! a flag; it is enforced by a bordered system at solve time.

mod geometry;
pub mod reference;

pub use geometry::ElementGeometry;
pub use reference::{ScalarReference, VectorReference, VectorSample};

use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, TopologySummary, Vec3};
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Lagrange,
    Bdm,
    DgPressure,
    CrouzeixRaviart,
    FacetTangential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    None,
    ZeroBoundaryTrace,
    ZeroMean,
    ZeroNormalTrace,
}

/// Local-to-global link; `global` is `None` for dofs removed by a
/// constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDof {
    pub global: Option<usize>,
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub enum Reference {
    Scalar(ScalarReference),
    Vector(VectorReference),
    /// Facet spaces carry no element basis.
    Facet,
}

/// Maximum degrees for which element bases are built.
pub const MAX_LAGRANGE_DEGREE: usize = 6;
pub const MAX_BDM_DEGREE: usize = 5;
pub const MAX_DG_DEGREE: usize = 5;

fn check_combination(kind: SpaceKind, degree: usize, constraint: Constraint) -> Result<()> {
    use Constraint as C;
    let ok = match kind {
        SpaceKind::Lagrange => degree >= 1 && matches!(constraint, C::None | C::ZeroBoundaryTrace | C::ZeroMean),
        SpaceKind::Bdm => matches!(constraint, C::None | C::ZeroNormalTrace),
        SpaceKind::DgPressure => matches!(constraint, C::None | C::ZeroMean),
        SpaceKind::CrouzeixRaviart => degree == 1 && matches!(constraint, C::None | C::ZeroMean),
        SpaceKind::FacetTangential => constraint == C::None,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::UnsupportedCombination(format!("{kind:?}({degree}) with {constraint:?}")))
    }
}

/// Closed-form dimension of a space from entity counts alone.
///
/// For `ZeroMean` this is the count before the mean constraint, matching
/// [`FeSpace::total_dofs`]; see [`effective_dimension`].
pub fn count_dofs(topo: &TopologySummary, kind: SpaceKind, degree: usize, constraint: Constraint) -> Result<usize> {
    check_combination(kind, degree, constraint)?;
    let (nv, ne, nt) = (topo.n_vertices, topo.n_edges, topo.n_triangles);
    Ok(match kind {
        SpaceKind::Lagrange => {
            let m = degree;
            let interior = if m >= 3 { (m - 1) * (m - 2) / 2 } else { 0 };
            let all = nv + (m - 1) * ne + interior * nt;
            match constraint {
                Constraint::ZeroBoundaryTrace => all - topo.n_boundary_vertices - (m - 1) * topo.n_boundary_edges,
                _ => all,
            }
        }
        SpaceKind::Bdm => {
            let k = degree;
            let edges = if constraint == Constraint::ZeroNormalTrace { topo.n_interior_edges } else { ne };
            let interior = if k >= 1 { (k + 1) * (k - 1) } else { 0 };
            (k + 1) * edges + interior * nt
        }
        SpaceKind::DgPressure => (degree + 1) * (degree + 2) / 2 * nt,
        SpaceKind::CrouzeixRaviart => ne,
        SpaceKind::FacetTangential => (degree + 1) * ne,
    })
}

/// Dimension after all constraints, including the mean constraint.
pub fn effective_dimension(topo: &TopologySummary, kind: SpaceKind, degree: usize, constraint: Constraint) -> Result<usize> {
    let n = count_dofs(topo, kind, degree, constraint)?;
    Ok(if constraint == Constraint::ZeroMean { n.saturating_sub(topo.n_components) } else { n })
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    kind: SpaceKind,
    degree: usize,
    constraint: Constraint,
    mesh: Arc<SurfaceMesh>,
    n_local: usize,
    dofs: Vec<LocalDof>,
    total_dofs: usize,
    reference: Reference,
    geometry: Vec<ElementGeometry>,
}

pub fn build_space(mesh: &Arc<SurfaceMesh>, kind: SpaceKind, degree: usize, constraint: Constraint) -> Result<FeSpace> {
    FeSpace::new(mesh, kind, degree, constraint)
}

impl FeSpace {
    pub fn new(mesh: &Arc<SurfaceMesh>, kind: SpaceKind, degree: usize, constraint: Constraint) -> Result<Self> {
        check_combination(kind, degree, constraint)?;
        let too_high = match kind {
            SpaceKind::Lagrange => degree > MAX_LAGRANGE_DEGREE,
            SpaceKind::Bdm => degree > MAX_BDM_DEGREE,
            SpaceKind::DgPressure => degree > MAX_DG_DEGREE,
            _ => false,
        };
        if too_high {
            return Err(Error::UnsupportedCombination(format!("{kind:?} of degree {degree} is not supported")));
        }
        if constraint == Constraint::ZeroMean {
            mesh.require_connected()?;
        }
        let geometry = (0..mesh.n_triangles())
            .map(|t| ElementGeometry::of_triangle(mesh, t))
            .collect::<Result<Vec<_>>>()?;
        let (reference, n_local, raw, n_raw) = match kind {
            SpaceKind::Lagrange => {
                let (raw, n) = lagrange_map(mesh, degree);
                (Reference::Scalar(ScalarReference::lagrange(degree)), (degree + 1) * (degree + 2) / 2, raw, n)
            }
            SpaceKind::Bdm => {
                let r = VectorReference::bdm(degree);
                let (raw, n) = bdm_map(mesh, degree, r.n_interior_dofs());
                let nl = r.dim();
                (Reference::Vector(r), nl, raw, n)
            }
            SpaceKind::DgPressure => {
                let nl = (degree + 1) * (degree + 2) / 2;
                let raw = (0..mesh.n_triangles() * nl).map(|i| (i, 1.0)).collect();
                (Reference::Scalar(ScalarReference::orthonormal(degree)), nl, raw, mesh.n_triangles() * nl)
            }
            SpaceKind::CrouzeixRaviart => {
                let raw = (0..mesh.n_triangles())
                    .flat_map(|t| mesh.triangle_edges(t).map(|e| (e, 1.0)))
                    .collect();
                (Reference::Scalar(ScalarReference::crouzeix_raviart()), 3, raw, mesh.n_edges())
            }
            SpaceKind::FacetTangential => {
                let nl = 3 * (degree + 1);
                let mut raw = Vec::with_capacity(mesh.n_triangles() * nl);
                for t in 0..mesh.n_triangles() {
                    for (l, e) in mesh.triangle_edges(t).into_iter().enumerate() {
                        let along = mesh.local_edge_along_tau(t, l);
                        for j in 0..=degree {
                            let s = if along || j % 2 == 0 { 1.0 } else { -1.0 };
                            raw.push((e * (degree + 1) + j, s));
                        }
                    }
                }
                (Reference::Facet, nl, raw, (degree + 1) * mesh.n_edges())
            }
        };
        let removed = removed_dofs(mesh, kind, degree, constraint, n_raw);
        let mut renumber = vec![None; n_raw];
        let mut next = 0;
        for (i, slot) in renumber.iter_mut().enumerate() {
            if !removed[i] {
                *slot = Some(next);
                next += 1;
            }
        }
        let dofs = raw
            .into_iter()
            .map(|(g, sign)| LocalDof { global: renumber[g], sign })
            .collect();
        Ok(FeSpace {
            kind,
            degree,
            constraint,
            mesh: Arc::clone(mesh),
            n_local,
            dofs,
            total_dofs: next,
            reference,
            geometry,
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn mesh(&self) -> &Arc<SurfaceMesh> {
        &self.mesh
    }

    pub fn total_dofs(&self) -> usize {
        self.total_dofs
    }

    /// Number of local basis functions per triangle.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn local_dofs(&self, t: usize) -> &[LocalDof] {
        &self.dofs[t * self.n_local..(t + 1) * self.n_local]
    }

    pub fn geometry(&self, t: usize) -> &ElementGeometry {
        &self.geometry[t]
    }

    pub fn reference(&self) -> &Reference {
        &self.reference
    }

    pub fn scalar_reference(&self) -> Option<&ScalarReference> {
        match &self.reference {
            Reference::Scalar(r) => Some(r),
            _ => None,
        }
    }

    pub fn vector_reference(&self) -> Option<&VectorReference> {
        match &self.reference {
            Reference::Vector(r) => Some(r),
            _ => None,
        }
    }

    /// Whether this space shares its mesh with `other`.
    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// Values and tangential gradients of the local scalar basis at reference
    /// point `(x, y)` of triangle `t`.
    pub fn eval_scalar(&self, t: usize, x: f64, y: f64) -> (Vec<f64>, Vec<Vec3>) {
        let r = self.scalar_reference().expect("scalar space");
        let (v, g) = r.eval(x, y);
        self.map_scalar(t, &v, &g)
    }

    /// Maps reference scalar values and gradients to triangle `t`.
    pub fn map_scalar(&self, t: usize, vals: &[f64], grads: &[[f64; 2]]) -> (Vec<f64>, Vec<Vec3>) {
        let geo = &self.geometry[t];
        let dofs = self.local_dofs(t);
        let v = vals.iter().zip(dofs).map(|(v, d)| d.sign * v).collect();
        let g = grads.iter().zip(dofs).map(|(g, d)| d.sign * geo.gradient(*g)).collect();
        (v, g)
    }

    /// Piola-mapped local vector basis at reference point `(x, y)` of
    /// triangle `t`, with global orientation signs applied.
    pub fn eval_vector(&self, t: usize, x: f64, y: f64) -> Vec<VectorValue> {
        let r = self.vector_reference().expect("vector space");
        self.map_vector(t, &r.eval(x, y))
    }

    /// Maps reference vector samples to triangle `t`.
    pub fn map_vector(&self, t: usize, samples: &[VectorSample]) -> Vec<VectorValue> {
        let geo = &self.geometry[t];
        samples
            .iter()
            .zip(self.local_dofs(t))
            .map(|(s, d)| VectorValue {
                value: d.sign * geo.piola(s.value),
                gradient: d.sign * geo.piola_jacobian(s.jacobian),
                divergence: d.sign * s.div() / geo.det,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VectorValue {
    pub value: Vec3,
    /// Tangential Jacobian `∇v` (acts on tangent vectors, annihilates `n`).
    pub gradient: Matrix3<f64>,
    pub divergence: f64,
}

#[derive(Debug, Clone)]
pub enum BasisValues {
    Scalar { values: Vec<Vec<f64>>, gradients: Vec<Vec<Vec3>> },
    Vector { values: Vec<Vec<VectorValue>> },
}

/// Evaluates the local basis of `space` on triangle `t` at barycentric
/// points `(λ₀, λ₁, λ₂)`.
pub fn eval_basis(space: &FeSpace, t: usize, points: &[[f64; 3]]) -> Result<BasisValues> {
    if t >= space.mesh.n_triangles() {
        return Err(Error::IndexOutOfRange { index: t, len: space.mesh.n_triangles() });
    }
    match &space.reference {
        Reference::Scalar(_) => {
            let (values, gradients) = points.iter().map(|p| space.eval_scalar(t, p[1], p[2])).unzip();
            Ok(BasisValues::Scalar { values, gradients })
        }
        Reference::Vector(_) => Ok(BasisValues::Vector {
            values: points.iter().map(|p| space.eval_vector(t, p[1], p[2])).collect(),
        }),
        Reference::Facet => Err(Error::UnsupportedCombination("facet spaces have no element basis".into())),
    }
}

fn lagrange_map(mesh: &SurfaceMesh, m: usize) -> (Vec<(usize, f64)>, usize) {
    let (nv, ne) = (mesh.n_vertices(), mesh.n_edges());
    let ni = reference::lagrange_interior(m);
    let per_edge = m - 1;
    let mut raw = Vec::new();
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangles()[t];
        raw.extend(tri.iter().map(|&v| (v, 1.0)));
        for (l, e) in mesh.triangle_edges(t).into_iter().enumerate() {
            let along = mesh.local_edge_along_tau(t, l);
            for i in 0..per_edge {
                let slot = if along { i } else { per_edge - 1 - i };
                raw.push((nv + e * per_edge + slot, 1.0));
            }
        }
        for i in 0..ni {
            raw.push((nv + ne * per_edge + t * ni + i, 1.0));
        }
    }
    (raw, nv + ne * per_edge + mesh.n_triangles() * ni)
}

fn bdm_map(mesh: &SurfaceMesh, k: usize, ni: usize) -> (Vec<(usize, f64)>, usize) {
    let ne = mesh.n_edges();
    let mut raw = Vec::new();
    for t in 0..mesh.n_triangles() {
        for (l, e) in mesh.triangle_edges(t).into_iter().enumerate() {
            let side = if mesh.is_first_side(t, l) { 1.0 } else { -1.0 };
            let along = mesh.local_edge_along_tau(t, l);
            for j in 0..=k {
                let parity = if along || j % 2 == 0 { 1.0 } else { -1.0 };
                raw.push((e * (k + 1) + j, side * parity));
            }
        }
        for i in 0..ni {
            raw.push((ne * (k + 1) + t * ni + i, 1.0));
        }
    }
    (raw, ne * (k + 1) + mesh.n_triangles() * ni)
}

fn removed_dofs(mesh: &SurfaceMesh, kind: SpaceKind, degree: usize, constraint: Constraint, n_raw: usize) -> Vec<bool> {
    let mut removed = vec![false; n_raw];
    match (kind, constraint) {
        (SpaceKind::Lagrange, Constraint::ZeroBoundaryTrace) => {
            let per_edge = degree - 1;
            for (v, on) in mesh.boundary_vertices().into_iter().enumerate() {
                removed[v] |= on;
            }
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.is_boundary() {
                    for i in 0..per_edge {
                        removed[mesh.n_vertices() + e * per_edge + i] = true;
                    }
                }
            }
        }
        (SpaceKind::Bdm, Constraint::ZeroNormalTrace) => {
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.is_boundary() {
                    for j in 0..=degree {
                        removed[e * (degree + 1) + j] = true;
                    }
                }
            }
        }
        _ => {}
    }
    removed
}

/// Coefficients paired with a space.
#[derive(Debug, Clone)]
pub struct FeField {
    space: Arc<FeSpace>,
    coefficients: Vec<f64>,
}

impl FeField {
    pub fn new(space: Arc<FeSpace>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.total_dofs() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space with {} dofs",
                coefficients.len(),
                space.total_dofs()
            )));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::DimensionMismatch(format!("coefficient {i} is not finite")));
        }
        Ok(FeField { space, coefficients })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.total_dofs();
        FeField { space, coefficients: vec![0.0; n] }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Scalar value at reference point `(x, y)` of triangle `t`.
    pub fn value_scalar(&self, t: usize, x: f64, y: f64) -> f64 {
        let (v, _) = self.space.eval_scalar(t, x, y);
        self.local_sum(t, &v, 0.0, |a, b| a + b)
    }

    /// Vector value at reference point `(x, y)` of triangle `t`.
    pub fn value_vector(&self, t: usize, x: f64, y: f64) -> Vec3 {
        let v: Vec<Vec3> = self.space.eval_vector(t, x, y).iter().map(|b| b.value).collect();
        self.local_sum(t, &v, Vec3::zeros(), |a, b| a + b)
    }

    fn local_sum<T: Copy + std::ops::Mul<f64, Output = T>>(&self, t: usize, vals: &[T], zero: T, add: impl Fn(T, T) -> T) -> T {
        self.space
            .local_dofs(t)
            .iter()
            .zip(vals)
            .filter_map(|(d, &v)| d.global.map(|g| v * self.coefficients[g]))
            .fold(zero, add)
    }
}

/// Local coefficient vector of a global vector on triangle `t` (signs are
/// already part of the evaluated basis, so no sign is applied here).
pub fn gather(space: &FeSpace, t: usize, global: &[f64]) -> Vec<f64> {
    space.local_dofs(t).iter().map(|d| d.global.map_or(0.0, |g| global[g])).collect()
}

/// BDM interpolant of an ambient vector field: edge moments are taken from
/// the `T₁` side of each edge, interior moments per triangle.
pub fn interpolate_bdm(space: &FeSpace, f: impl Fn(Vec3) -> Vec3) -> Result<Vec<f64>> {
    let r = space.vector_reference().ok_or_else(|| Error::UnsupportedCombination("BDM interpolation needs a BDM space".into()))?;
    let mesh = space.mesh();
    let mut out = vec![0.0; space.total_dofs()];
    let n_edge = 3 * r.n_edge_dofs();
    for t in 0..mesh.n_triangles() {
        let geo = space.geometry(t);
        let local = r.interpolate(|x, y| geo.inverse_piola(&geo.tangential(&f(geo.map(x, y)))));
        for (i, (d, val)) in space.local_dofs(t).iter().zip(&local).enumerate() {
            let Some(g) = d.global else { continue };
            let owner = i >= n_edge || mesh.is_first_side(t, i / r.n_edge_dofs());
            if owner {
                out[g] = d.sign * val;
            }
        }
    }
    Ok(out)
}

/// Ambient position of a reference point of triangle `t`.
pub fn physical_point(space: &FeSpace, t: usize, p: [f64; 2]) -> Vec3 {
    space.geometry(t).map(p[0], p[1])
}

/// Triangle quadrature rule exact for integrands of the given degree.
pub fn rule(degree: usize) -> QuadratureRule {
    QuadratureRule::triangle(degree)
}
