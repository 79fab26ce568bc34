use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{edge_point, edge_rule, globals, scatter, triangle_degree, VectorTab};
use crate::error::{Error, Result};
use crate::fespace::{FeSpace, SpaceKind, VectorValue};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Vec3;

/// Tangential boundary condition on `Γ_h`. The normal component is fixed by
/// the space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// Homogeneous tangential Dirichlet data imposed through the symmetric
    /// consistency and penalty terms on boundary edges.
    #[default]
    NoSlip,
    /// No boundary edge terms (natural condition for the tangential stress).
    FreeSlip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SipParameters {
    pub mu: f64,
    pub alpha: f64,
    pub boundary: BoundaryCondition,
}

/// Penalty `4(k+1)²`.
pub fn default_penalty(k: usize) -> f64 {
    4.0 * ((k + 1) * (k + 1)) as f64
}

fn sym(g: &Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (g + g.transpose())
}

fn frob(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Symmetric interior penalty form
///
/// `a(u, v) = Σ_T ∫ μ ε(u):ε(v) + Σ_E ∫ ⦃−μ ε(u)ν⦄·τ ⟦v⟧_τ + ⦃−μ ε(v)ν⦄·τ ⟦u⟧_τ
///            + (αμ/h_E) ⟦u⟧_τ ⟦v⟧_τ`
///
/// with `⦃σν⦄ = ½(σ₁ν₁ − σ₂ν₂)` and `⟦u⟧_τ = (u₁ − u₂)·τ` on interior
/// edges, `⦃σν⦄ = σν_Γ` and `⟦u⟧_τ = u·τ` on boundary edges (no-slip
/// only).
pub fn assemble_sip(v: &FeSpace, p: SipParameters) -> Result<SparseMatrix> {
    if v.kind() != SpaceKind::Bdm {
        return Err(Error::UnsupportedCombination("SIP form needs a BDM space".into()));
    }
    if !(p.mu > 0.0) {
        return Err(Error::NonpositiveParameter("mu"));
    }
    if !(p.alpha > 0.0) {
        return Err(Error::NonpositiveParameter("alpha"));
    }
    let mesh = v.mesh();
    let n = v.total_dofs();
    let nl = v.n_local();
    let mut builder = TripletBuilder::new(n, n);
    let tab = VectorTab::new(v, triangle_degree(v.degree()));
    for t in 0..mesh.n_triangles() {
        let det = v.geometry(t).det;
        let mut k = vec![vec![0.0; nl]; nl];
        for (q, &w) in tab.rule.weights.iter().enumerate() {
            let eps: Vec<Matrix3<f64>> = v.map_vector(t, &tab.samples[q]).iter().map(|b| sym(&b.gradient)).collect();
            for i in 0..nl {
                for j in 0..nl {
                    k[i][j] += w * det * p.mu * frob(&eps[i], &eps[j]);
                }
            }
        }
        let g = globals(v, t);
        scatter(&mut builder, &g, &g, &k);
    }

    let vr = v.vector_reference().expect("BDM reference");
    let rule = edge_rule(v.degree());
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.is_boundary() && p.boundary == BoundaryCondition::FreeSlip {
            continue;
        }
        let frame = mesh.edge_frame(e)?;
        let h = frame.length;
        let sides: Vec<(usize, usize, Vec3, f64)> = match edge.second {
            Some(second) => vec![
                (edge.first.0, edge.first.1, frame.nu1, 0.5),
                (second.0, second.1, frame.nu2.expect("interior edge"), -0.5),
            ],
            None => vec![(edge.first.0, edge.first.1, frame.nu1, 1.0)],
        };
        // Side weights realize ⦃σν⦄ = ½(σ₁ν₁ − σ₂ν₂); local dofs of both
        // sides are stacked.
        let rows: Vec<Option<usize>> = sides.iter().flat_map(|s| globals(v, s.0)).collect();
        let m = rows.len();
        let mut k = vec![vec![0.0; m]; m];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let mut jump = Vec::with_capacity(m);
            let mut flux = Vec::with_capacity(m);
            for (side, &(t, l, nu, avg)) in sides.iter().enumerate() {
                let (x, y) = edge_point(v, t, l, s);
                let vals: Vec<VectorValue> = v.map_vector(t, &vr.eval(x, y));
                let jsign = if side == 0 { 1.0 } else { -1.0 };
                for b in &vals {
                    jump.push(jsign * b.value.dot(&frame.tau));
                    let traction = sym(&b.gradient) * nu;
                    flux.push(-p.mu * avg * traction.dot(&frame.tau));
                }
            }
            let ds = w * h;
            for i in 0..m {
                for j in 0..m {
                    k[i][j] += ds * (flux[j] * jump[i] + flux[i] * jump[j] + p.alpha * p.mu / h * jump[i] * jump[j]);
                }
            }
        }
        scatter(&mut builder, &rows, &rows, &k);
    }
    Ok(builder.build().mark_symmetric())
}
