use serde::{Deserialize, Serialize};

use crate::assembly::pressure_degree;
use crate::error::Result;
use crate::fespace::{count_dofs, effective_dimension, Constraint, SpaceKind};
use crate::mesh::TopologySummary;

/// Dimension count behind `dim H^k_BDM = b₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub k: usize,
    pub dim_bdm: usize,
    /// `dim div(BDM^k_0)`: all mean-free pressures.
    pub dim_div_range: usize,
    pub dim_divergence_free: usize,
    pub dim_rot: usize,
    pub difference: i64,
    pub b1: usize,
    pub ok: bool,
}

/// `dim J^k_BDM − dim rot(S^{k+1}_0)` from entity counts, compared with
/// `b₁ = 1 + δ_{Γ=∅} − χ` for a connected surface.
pub fn verify_dimension(topo: &TopologySummary, k: usize) -> Result<DimensionReport> {
    let dim_bdm = count_dofs(topo, SpaceKind::Bdm, k, Constraint::ZeroNormalTrace)?;
    let dim_div_range = effective_dimension(topo, SpaceKind::DgPressure, pressure_degree(k), Constraint::ZeroMean)?;
    let dim_divergence_free = dim_bdm - dim_div_range;
    let sc = if topo.has_boundary() { Constraint::ZeroBoundaryTrace } else { Constraint::ZeroMean };
    let dim_rot = effective_dimension(topo, SpaceKind::Lagrange, k + 1, sc)?;
    let difference = dim_divergence_free as i64 - dim_rot as i64;
    let closed = if topo.has_boundary() { 0 } else { 1 };
    let betti = 1 + closed - topo.euler_characteristic;
    Ok(DimensionReport {
        k,
        dim_bdm,
        dim_div_range,
        dim_divergence_free,
        dim_rot,
        difference,
        b1: topo.b1,
        ok: difference == betti && difference == topo.b1 as i64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{analyze_topology, shapes};

    #[test]
    fn hand_counts() {
        let r = verify_dimension(&analyze_topology(&shapes::tetrahedron()), 0).unwrap();
        assert_eq!((r.dim_bdm, r.dim_div_range, r.dim_divergence_free, r.dim_rot, r.difference), (6, 3, 3, 3, 0));
        assert!(r.ok);
        let r = verify_dimension(&analyze_topology(&shapes::torus(3, 3, 1.0, 0.4)), 0).unwrap();
        assert_eq!((r.dim_bdm, r.dim_div_range, r.dim_divergence_free, r.dim_rot, r.difference), (27, 17, 10, 8, 2));
        assert!(r.ok);
    }

    #[test]
    fn table_one_topology() {
        let topo = TopologySummary::closed(3490, 0);
        let r = verify_dimension(&topo, 3).unwrap();
        assert_eq!(r.difference, 2);
        assert!(r.ok);
    }

    #[test]
    fn corpus_at_several_degrees() {
        for mesh in [shapes::genus_two(4, 4), shapes::sphere_with_holes(1, 4), shapes::flat_grid(3, 2), shapes::icosphere(1)] {
            let topo = analyze_topology(&mesh);
            for k in 0..=4 {
                assert!(verify_dimension(&topo, k).unwrap().ok, "k={k} {topo:?}");
            }
        }
    }
}
