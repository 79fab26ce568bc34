use nalgebra::{Matrix2x3, Matrix3, Matrix3x2};

use crate::error::{Error, Result};
use crate::mesh::{SurfaceMesh, Vec3};

/// Affine map `Φ(x̂) = p₀ + DΦ·x̂` from the reference triangle onto a mesh
/// triangle, with `𝒥 = det(DΦᵀDΦ)^{1/2}`.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub origin: Vec3,
    pub d_phi: Matrix3x2<f64>,
    pub det: f64,
    /// `(DΦᵀDΦ)⁻¹DΦᵀ`.
    pub pinv: Matrix2x3<f64>,
    pub normal: Vec3,
}

impl ElementGeometry {
    pub fn new(corners: [Vec3; 3]) -> Option<Self> {
        let a = corners[1] - corners[0];
        let b = corners[2] - corners[0];
        let cross = a.cross(&b);
        let det = cross.norm();
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        let d_phi = Matrix3x2::from_columns(&[a, b]);
        let g = d_phi.transpose() * d_phi;
        let pinv = g.try_inverse()? * d_phi.transpose();
        Some(ElementGeometry { origin: corners[0], d_phi, det, pinv, normal: cross / det })
    }

    pub fn of_triangle(mesh: &SurfaceMesh, t: usize) -> Result<Self> {
        if t >= mesh.n_triangles() {
            return Err(Error::IndexOutOfRange { index: t, len: mesh.n_triangles() });
        }
        Self::new(mesh.corners(t)).ok_or(Error::DegenerateTriangle(t))
    }

    pub fn map(&self, x: f64, y: f64) -> Vec3 {
        self.origin + self.d_phi * nalgebra::Vector2::new(x, y)
    }

    /// Contravariant Piola transform `v = DΦ v̂ / 𝒥`.
    pub fn piola(&self, v: [f64; 2]) -> Vec3 {
        self.d_phi * nalgebra::Vector2::new(v[0], v[1]) / self.det
    }

    /// Inverse Piola transform of the tangential part of `v`.
    pub fn inverse_piola(&self, v: &Vec3) -> [f64; 2] {
        let r = self.pinv * v * self.det;
        [r[0], r[1]]
    }

    /// Tangential gradient of a scalar from its reference gradient.
    pub fn gradient(&self, g: [f64; 2]) -> Vec3 {
        self.pinv.transpose() * nalgebra::Vector2::new(g[0], g[1])
    }

    /// Tangential Jacobian `∇v = DΦ Dv̂ (DΦ)⁺ / 𝒥` of a Piola-mapped field.
    pub fn piola_jacobian(&self, j: [[f64; 2]; 2]) -> Matrix3<f64> {
        let dv = nalgebra::Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
        self.d_phi * dv * self.pinv / self.det
    }

    /// Projects `v` onto the triangle's tangent plane.
    pub fn tangential(&self, v: &Vec3) -> Vec3 {
        v - self.normal * self.normal.dot(v)
    }
}
