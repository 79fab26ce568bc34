use crate::error::{Error, Result};
use crate::fespace::{Constraint, FeSpace, SpaceKind};
use crate::linalg::{SparseMatrix, TripletBuilder};

/// Matrix whose column `j` holds the BDM coefficients of `rot φ_j`.
///
/// On each element `rot φ = 𝒥⁻¹ DΦ rot̂ φ̂` with `rot̂ φ̂ = (∂ŷφ̂, −∂x̂φ̂)`,
/// so the BDM dofs of `rot φ` are the reference dofs of `rot̂ φ̂`. Edge
/// moments are taken from the `T₁` side; the other side carries the same
/// value because the normal trace of `rot φ` is the tangential derivative of
/// the continuous trace of `φ`.
pub fn assemble_rot_embedding(s: &FeSpace, v: &FeSpace) -> Result<SparseMatrix> {
    if s.kind() != SpaceKind::Lagrange || v.kind() != SpaceKind::Bdm {
        return Err(Error::UnsupportedCombination("rot embedding maps Lagrange into BDM".into()));
    }
    if s.degree() != v.degree() + 1 {
        return Err(Error::DegreeMismatch(format!("Lagrange({}) does not embed into BDM({})", s.degree(), v.degree())));
    }
    if !s.same_mesh(v) {
        return Err(Error::DimensionMismatch("spaces live on different meshes".into()));
    }
    let mesh = s.mesh();
    if mesh.has_boundary() && v.constraint() == Constraint::ZeroNormalTrace && s.constraint() != Constraint::ZeroBoundaryTrace {
        return Err(Error::UnsupportedCombination(
            "streamfunctions need a zero boundary trace when the velocity has zero normal trace".into(),
        ));
    }
    let sr = s.scalar_reference().expect("Lagrange reference");
    let vr = v.vector_reference().expect("BDM reference");
    let ne = vr.n_edge_dofs();
    let n_edge = 3 * ne;
    // Reference dofs of rot̂ φ̂_b for every local Lagrange basis function.
    let local: Vec<Vec<f64>> = (0..sr.dim())
        .map(|b| {
            vr.interpolate(|x, y| {
                let (_, g) = sr.eval(x, y);
                [g[b][1], -g[b][0]]
            })
        })
        .collect();
    let mut builder = TripletBuilder::new(v.total_dofs(), s.total_dofs());
    for t in 0..mesh.n_triangles() {
        let sd = s.local_dofs(t);
        for (i, vd) in v.local_dofs(t).iter().enumerate() {
            let Some(row) = vd.global else { continue };
            if i < n_edge && !mesh.is_first_side(t, i / ne) {
                continue;
            }
            for (b, d) in sd.iter().enumerate() {
                let Some(col) = d.global else { continue };
                let val = vd.sign * d.sign * local[b][i];
                if val.abs() > 1e-14 {
                    builder.push(row, col, val);
                }
            }
        }
    }
    Ok(builder.build())
}
