use serde::{Deserialize, Serialize};

use super::SurfaceMesh;

/// Entity counts and Betti numbers of a triangulated surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_triangles: usize,
    pub n_interior_vertices: usize,
    pub n_boundary_vertices: usize,
    pub n_interior_edges: usize,
    pub n_boundary_edges: usize,
    pub n_boundary_loops: usize,
    pub n_components: usize,
    pub euler_characteristic: i64,
    pub b0: usize,
    pub b1: usize,
    pub b2: usize,
}

impl TopologySummary {
    pub fn has_boundary(&self) -> bool {
        self.n_boundary_edges > 0
    }

    /// Counts of a connected closed triangulation with `n_triangles` faces and
    /// Euler characteristic `chi`. Uses `3|𝒯| = 2|ℰ|`.
    ///
    /// # Panics
    /// If `n_triangles` is odd or the counts are inconsistent.
    pub fn closed(n_triangles: usize, chi: i64) -> Self {
        assert!(n_triangles.is_multiple_of(2), "closed triangulations have an even number of faces");
        let n_edges = 3 * n_triangles / 2;
        let n_vertices = chi + n_edges as i64 - n_triangles as i64;
        assert!(n_vertices > 0, "inconsistent Euler characteristic");
        let b1 = 2 - chi;
        assert!(b1 >= 0 && b1 % 2 == 0, "closed orientable surfaces have even b1");
        TopologySummary {
            n_vertices: n_vertices as usize,
            n_edges,
            n_triangles,
            n_interior_vertices: n_vertices as usize,
            n_boundary_vertices: 0,
            n_interior_edges: n_edges,
            n_boundary_edges: 0,
            n_boundary_loops: 0,
            n_components: 1,
            euler_characteristic: chi,
            b0: 1,
            b1: b1 as usize,
            b2: 1,
        }
    }
}

/// Counts entities and derives Betti numbers per connected component via the
/// Euler–Poincaré formula; numbers of disconnected meshes are summed.
pub fn analyze_topology(mesh: &SurfaceMesh) -> TopologySummary {
    let n_comp = mesh.n_components();
    let comp = mesh.triangle_components();
    let mut v_seen = vec![usize::MAX; mesh.n_vertices()];
    let mut counts = vec![[0i64; 3]; n_comp];
    let mut has_boundary = vec![false; n_comp];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let c = comp[t];
        counts[c][2] += 1;
        for &v in tri {
            if v_seen[v] == usize::MAX {
                v_seen[v] = c;
                counts[c][0] += 1;
            }
        }
    }
    for e in mesh.edges() {
        let c = comp[e.first.0];
        counts[c][1] += 1;
        if e.is_boundary() {
            has_boundary[c] = true;
        }
    }
    let (mut b0, mut b1, mut b2) = (0i64, 0i64, 0i64);
    for c in 0..n_comp {
        let chi = counts[c][0] - counts[c][1] + counts[c][2];
        let c2 = if has_boundary[c] { 0 } else { 1 };
        b0 += 1;
        b2 += c2;
        b1 += 1 + c2 - chi;
    }
    let on_boundary = mesh.boundary_vertices();
    let n_boundary_vertices = on_boundary.iter().filter(|&&b| b).count();
    let n_boundary_edges = mesh.edges().iter().filter(|e| e.is_boundary()).count();
    TopologySummary {
        n_vertices: mesh.n_vertices(),
        n_edges: mesh.n_edges(),
        n_triangles: mesh.n_triangles(),
        n_interior_vertices: mesh.n_vertices() - n_boundary_vertices,
        n_boundary_vertices,
        n_interior_edges: mesh.n_edges() - n_boundary_edges,
        n_boundary_edges,
        n_boundary_loops: mesh.boundary_loops().len(),
        n_components: n_comp,
        euler_characteristic: mesh.n_vertices() as i64 - mesh.n_edges() as i64
            + mesh.n_triangles() as i64,
        b0: b0 as usize,
        b1: b1 as usize,
        b2: b2 as usize,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn tetrahedron_is_a_sphere() {
        let t = analyze_topology(&shapes::tetrahedron());
        assert_eq!((t.n_vertices, t.n_edges, t.n_triangles), (4, 6, 4));
        assert_eq!(t.euler_characteristic, 2);
        assert_eq!((t.b0, t.b1, t.b2), (1, 0, 1));
    }

    #[test]
    fn structured_torus_counts() {
        let t = analyze_topology(&shapes::torus(3, 3, 1.0, 0.4));
        assert_eq!((t.n_vertices, t.n_edges, t.n_triangles), (9, 27, 18));
        assert_eq!(t.euler_characteristic, 0);
        assert_eq!(t.b1, 2);
        assert!(!t.has_boundary());
    }

    #[test]
    fn single_triangle() {
        let t = analyze_topology(&shapes::flat_triangle());
        assert_eq!(t.n_boundary_edges, 3);
        assert_eq!(t.n_boundary_loops, 1);
        assert_eq!((t.b0, t.b1, t.b2), (1, 0, 0));
    }

    #[test]
    fn four_hole_sphere_has_three_loops() {
        let mesh = shapes::sphere_with_holes(2, 4);
        let t = analyze_topology(&mesh);
        assert_eq!(t.n_boundary_loops, 4);
        assert_eq!(t.b1, 3);
        assert_eq!(t.n_boundary_edges, t.n_boundary_vertices);
    }

    #[test]
    fn genus_two_and_knot() {
        assert_eq!(analyze_topology(&shapes::genus_two(6, 6)).b1, 4);
        assert_eq!(analyze_topology(&shapes::trefoil_tube(36, 6, 0.35)).b1, 2);
    }

    #[test]
    fn disconnected_numbers_are_summed() {
        let torus = shapes::torus(4, 3, 1.0, 0.3);
        let tet = shapes::tetrahedron();
        let off = torus.n_vertices();
        let mut p = torus.positions().to_vec();
        p.extend(tet.positions().iter().map(|x| x.add_scalar(10.0)));
        let mut tris = torus.triangles().to_vec();
        tris.extend(tet.triangles().iter().map(|t| t.map(|v| v + off)));
        let t = analyze_topology(&SurfaceMesh::new(p, tris).unwrap());
        assert_eq!((t.b0, t.b1, t.b2), (2, 2, 2));
    }

    #[test]
    fn table_topology() {
        let t = TopologySummary::closed(3490, 0);
        assert_eq!((t.n_vertices, t.n_edges), (1745, 5235));
        assert_eq!(t.b1, 2);
    }
}
