//! Oriented triangle surfaces embedded in 3-space.
//!
//! A [`SurfaceMesh`] is built from raw vertex positions and vertex-index
//! triples. Construction derives the edge topology, repairs inconsistent
//! winding when the surface is orientable, and caches per-triangle normals and
//! per-edge frames `(τ, ν₁, ν₂)` used by all inter-element terms.
//!
//! Edge conventions:
//! * `τ` points from the lower to the higher global vertex index.
//! * On an interior edge, `T₁` is the triangle that traverses the edge against
//!   `τ`; then `ν₁ = n|T₁ × τ` and `ν₂ = −n|T₂ × τ` are the outward in-plane
//!   co-normals of `T₁` and `T₂`.
//! * On a boundary edge the only triangle is `T₁` and `ν₁` is its outward
//!   co-normal.
//! * Local edge `l` of a triangle joins local vertices `l+1` and `l+2`
//!   (mod 3), i.e. it is opposite local vertex `l`.

mod io;
pub mod shapes;
mod topology;

pub use io::{load_mesh, parse_obj, parse_off, write_off, MeshFormat, RawMesh};
pub use topology::{analyze_topology, TopologySummary};

use std::collections::{HashMap, VecDeque};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Edge incidence record.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// `[low, high]` global vertex indices.
    pub vertices: [usize; 2],
    /// `(triangle, local edge)` of `T₁`.
    pub first: (usize, usize),
    /// `(triangle, local edge)` of `T₂`, absent on boundary edges.
    pub second: Option<(usize, usize)>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.second.is_none()
    }
}

/// Unit tangent and side co-normals of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFrame {
    pub tau: Vec3,
    pub nu1: Vec3,
    pub nu2: Option<Vec3>,
    pub length: f64,
}

impl EdgeFrame {
    /// `ν̄ = (ν₁ + ν₂)/2`; on boundary edges this is `ν₁`.
    pub fn nu_bar(&self) -> Vec3 {
        match self.nu2 {
            Some(nu2) => 0.5 * (self.nu1 + nu2),
            None => self.nu1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    positions: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    frames: Vec<EdgeFrame>,
    component: Vec<usize>,
    n_components: usize,
    flipped: usize,
}

impl SurfaceMesh {
    /// Builds a mesh, repairing triangle winding where needed.
    ///
    /// Unreferenced vertices are dropped and the remaining ones renumbered in
    /// their original order.
    pub fn new(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= positions.len() {
                    return Err(Error::IndexOutOfRange { index: v, len: positions.len() });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle(t));
            }
        }
        let (positions, mut triangles) = compact(positions, triangles);
        check_areas(&positions, &triangles)?;
        let flipped = orient(&mut triangles)?;
        let mut mesh = SurfaceMesh {
            positions,
            triangles,
            edges: Vec::new(),
            tri_edges: Vec::new(),
            boundary_loops: Vec::new(),
            normals: Vec::new(),
            areas: Vec::new(),
            frames: Vec::new(),
            component: Vec::new(),
            n_components: 0,
            flipped,
        };
        mesh.build_edges();
        mesh.build_geometry();
        mesh.build_boundary_loops();
        mesh.build_components();
        Ok(mesh)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge indices of the three local edges of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn normal(&self, t: usize) -> Vec3 {
        self.normals[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary_loops.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Component label of each triangle.
    pub fn triangle_components(&self) -> &[usize] {
        &self.component
    }

    /// Number of triangles whose winding was flipped during construction.
    pub fn flipped_triangles(&self) -> usize {
        self.flipped
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.n_components == 1 {
            Ok(())
        } else {
            Err(Error::DisconnectedMesh(self.n_components))
        }
    }

    /// Corner positions of triangle `t` in local order.
    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    /// Whether local edge `l` of triangle `t` is traversed along `τ`.
    pub fn local_edge_along_tau(&self, t: usize, l: usize) -> bool {
        let tri = self.triangles[t];
        tri[(l + 1) % 3] < tri[(l + 2) % 3]
    }

    /// Whether triangle `t` is the `T₁` side of its local edge `l`.
    pub fn is_first_side(&self, t: usize, l: usize) -> bool {
        self.edges[self.tri_edges[t][l]].first == (t, l)
    }

    /// Outward in-plane co-normal of triangle `t` on its local edge `l`.
    pub fn outward_conormal(&self, t: usize, l: usize) -> Vec3 {
        let e = &self.edges[self.tri_edges[t][l]];
        let f = &self.frames[self.tri_edges[t][l]];
        if e.first == (t, l) {
            f.nu1
        } else {
            f.nu2.expect("second side of an interior edge")
        }
    }

    pub fn edge_frame(&self, edge: usize) -> Result<EdgeFrame> {
        self.frames
            .get(edge)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: edge, len: self.frames.len() })
    }

    pub fn frames(&self) -> &[EdgeFrame] {
        &self.frames
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bbox_diagonal(&self.positions)
    }

    /// Shortest edge length.
    pub fn h_min(&self) -> f64 {
        self.frames.iter().map(|f| f.length).fold(f64::INFINITY, f64::min)
    }

    /// SHA-256 of the vertex coordinates and (oriented) triangle indices, as
    /// lowercase hex. Identifies the mesh in basis files and run manifests.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.positions.len() as u64).to_le_bytes());
        for p in &self.positions {
            for c in p.iter() {
                h.update(c.to_le_bytes());
            }
        }
        h.update((self.triangles.len() as u64).to_le_bytes());
        for t in &self.triangles {
            for &v in t {
                h.update((v as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Vertices touching a boundary edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.positions.len()];
        for e in self.edges.iter().filter(|e| e.is_boundary()) {
            on[e.vertices[0]] = true;
            on[e.vertices[1]] = true;
        }
        on
    }

    fn build_edges(&mut self) {
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; self.triangles.len()];
        // Orientation has been made consistent, so each interior edge is seen
        // once along τ and once against it.
        for (t, tri) in self.triangles.iter().enumerate() {
            for l in 0..3 {
                let a = tri[(l + 1) % 3];
                let b = tri[(l + 2) % 3];
                let key = (a.min(b), a.max(b));
                let against = a > b;
                match index.get(&key) {
                    None => {
                        index.insert(key, edges.len());
                        tri_edges[t][l] = edges.len();
                        edges.push(Edge { vertices: [key.0, key.1], first: (t, l), second: None });
                    }
                    Some(&e) => {
                        tri_edges[t][l] = e;
                        let edge = &mut edges[e];
                        if against {
                            edge.second = Some(edge.first);
                            edge.first = (t, l);
                        } else {
                            edge.second = Some((t, l));
                        }
                    }
                }
            }
        }
        self.edges = edges;
        self.tri_edges = tri_edges;
    }

    fn build_geometry(&mut self) {
        self.normals.clear();
        self.areas.clear();
        for t in 0..self.triangles.len() {
            let [p0, p1, p2] = self.corners(t);
            let c = (p1 - p0).cross(&(p2 - p0));
            let norm = c.norm();
            self.normals.push(c / norm);
            self.areas.push(0.5 * norm);
        }
        let mut frames = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let pa = self.positions[e.vertices[0]];
            let pb = self.positions[e.vertices[1]];
            let length = (pb - pa).norm();
            let tau = (pb - pa) / length;
            let (t1, l1) = e.first;
            let nu1 = if self.local_edge_along_tau(t1, l1) {
                // Lone boundary triangle traversing along τ.
                -self.normals[t1].cross(&tau)
            } else {
                self.normals[t1].cross(&tau)
            };
            let nu2 = e.second.map(|(t2, _)| -self.normals[t2].cross(&tau));
            frames.push(EdgeFrame { tau, nu1, nu2, length });
        }
        self.frames = frames;
    }

    fn build_boundary_loops(&mut self) {
        // Directed boundary edges follow the winding of their triangle.
        let mut outgoing: HashMap<usize, Vec<usize>> = HashMap::new();
        let mut boundary = Vec::new();
        for ei in 0..self.edges.len() {
            if let Some(start) = self.boundary_start(ei) {
                outgoing.entry(start).or_default().push(ei);
                boundary.push(ei);
            }
        }
        for list in outgoing.values_mut() {
            list.sort_unstable();
        }
        let mut used = vec![false; self.edges.len()];
        let mut loops = Vec::new();
        for &seed in &boundary {
            if used[seed] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut cur = seed;
            loop {
                used[cur] = true;
                cycle.push(cur);
                let end = self.boundary_end(cur);
                let next = outgoing
                    .get(&end)
                    .and_then(|cands| cands.iter().copied().find(|&c| !used[c]));
                match next {
                    Some(n) => cur = n,
                    None => break,
                }
            }
            loops.push(cycle);
        }
        self.boundary_loops = loops;
    }

    fn boundary_start(&self, ei: usize) -> Option<usize> {
        let e = &self.edges[ei];
        if !e.is_boundary() {
            return None;
        }
        let (t, l) = e.first;
        Some(self.triangles[t][(l + 1) % 3])
    }

    fn boundary_end(&self, ei: usize) -> usize {
        let (t, l) = self.edges[ei].first;
        self.triangles[t][(l + 2) % 3]
    }

    fn build_components(&mut self) {
        let n = self.triangles.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for seed in 0..n {
            if comp[seed] != usize::MAX {
                continue;
            }
            let mut queue = VecDeque::from([seed]);
            comp[seed] = count;
            while let Some(t) = queue.pop_front() {
                for &e in &self.tri_edges[t] {
                    let edge = &self.edges[e];
                    for (nb, _) in std::iter::once(edge.first).chain(edge.second) {
                        if comp[nb] == usize::MAX {
                            comp[nb] = count;
                            queue.push_back(nb);
                        }
                    }
                }
            }
            count += 1;
        }
        self.component = comp;
        self.n_components = count;
    }
}

fn bbox_diagonal(positions: &[Vec3]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let mut lo = positions[0];
    let mut hi = positions[0];
    for p in positions {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

fn compact(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut used = vec![false; positions.len()];
    for tri in &triangles {
        for &v in tri {
            used[v] = true;
        }
    }
    if used.iter().all(|&u| u) {
        return (positions, triangles);
    }
    let mut remap = vec![usize::MAX; positions.len()];
    let mut kept = Vec::new();
    for (i, p) in positions.into_iter().enumerate() {
        if used[i] {
            remap[i] = kept.len();
            kept.push(p);
        }
    }
    let triangles = triangles.into_iter().map(|t| t.map(|v| remap[v])).collect();
    (kept, triangles)
}

fn check_areas(positions: &[Vec3], triangles: &[[usize; 3]]) -> Result<()> {
    let diag = bbox_diagonal(positions);
    let threshold = 1e-12 * diag * diag;
    for (t, tri) in triangles.iter().enumerate() {
        let [a, b, c] = tri.map(|v| positions[v]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        if !(area > threshold) {
            return Err(Error::DegenerateTriangle(t));
        }
    }
    Ok(())
}

/// Makes winding consistent by breadth-first search over the dual graph.
/// Returns the number of flipped triangles.
fn orient(triangles: &mut [[usize; 3]]) -> Result<usize> {
    let mut incident: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for l in 0..3 {
            let a = tri[(l + 1) % 3];
            let b = tri[(l + 2) % 3];
            let list = incident.entry((a.min(b), a.max(b))).or_default();
            list.push((t, a < b));
            if list.len() > 2 {
                return Err(Error::NonManifold(a.min(b), a.max(b)));
            }
        }
    }
    let n = triangles.len();
    let mut tri_keys = vec![[(0usize, 0usize); 3]; n];
    for (t, tri) in triangles.iter().enumerate() {
        for l in 0..3 {
            let a = tri[(l + 1) % 3];
            let b = tri[(l + 2) % 3];
            tri_keys[t][l] = (a.min(b), a.max(b));
        }
    }
    // flip[t]: Some(true) if triangle t must be reversed.
    let mut flip: Vec<Option<bool>> = vec![None; n];
    for seed in 0..n {
        if flip[seed].is_some() {
            continue;
        }
        flip[seed] = Some(false);
        let mut queue = VecDeque::from([seed]);
        while let Some(t) = queue.pop_front() {
            let ft = flip[t].unwrap();
            for key in tri_keys[t] {
                let list = &incident[&key];
                if list.len() < 2 {
                    continue;
                }
                let (mine, other) = if list[0].0 == t { (list[0], list[1]) } else { (list[1], list[0]) };
                // Effective directions must differ after flips.
                let my_dir = mine.1 ^ ft;
                let needed = !my_dir;
                let other_flip = other.1 ^ needed;
                match flip[other.0] {
                    None => {
                        flip[other.0] = Some(other_flip);
                        queue.push_back(other.0);
                    }
                    Some(f) if f != other_flip => return Err(Error::NonOrientable),
                    Some(_) => {}
                }
            }
        }
    }
    let mut flipped = 0;
    for (t, f) in flip.into_iter().enumerate() {
        if f == Some(true) {
            triangles[t].swap(1, 2);
            flipped += 1;
        }
    }
    Ok(flipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles(fold: bool) -> SurfaceMesh {
        // The second triangle lies in the plane y = 0 when folded.
        let apex = if fold { Vec3::new(0.5, 0.0, -1.0) } else { Vec3::new(0.5, -1.0, 0.0) };
        let positions =
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), apex];
        SurfaceMesh::new(positions, vec![[0, 1, 2], [1, 0, 3]]).unwrap()
    }

    fn shared_edge(mesh: &SurfaceMesh) -> usize {
        mesh.edges().iter().position(|e| !e.is_boundary()).unwrap()
    }

    #[test]
    fn coplanar_conormals_are_opposite() {
        let mesh = two_triangles(false);
        let f = mesh.edge_frame(shared_edge(&mesh)).unwrap();
        assert!((f.nu1 + f.nu2.unwrap()).norm() < 1e-14);
        assert!(f.nu_bar().norm() < 1e-14);
    }

    #[test]
    fn right_angle_fold_gives_orthogonal_conormals() {
        let mesh = two_triangles(true);
        let f = mesh.edge_frame(shared_edge(&mesh)).unwrap();
        let nu2 = f.nu2.unwrap();
        assert!(f.nu1.dot(&nu2).abs() < 1e-14);
        // Both point away from their triangles.
        let e = &mesh.edges()[shared_edge(&mesh)];
        for ((t, _), nu) in [(e.first, f.nu1), (e.second.unwrap(), nu2)] {
            let [a, b, c] = mesh.corners(t);
            let centroid = (a + b + c) / 3.0;
            let mid = 0.5 * (mesh.positions()[e.vertices[0]] + mesh.positions()[e.vertices[1]]);
            assert!(nu.dot(&(centroid - mid)) < 0.0);
        }
    }

    #[test]
    fn boundary_conormal_points_outward() {
        let mesh = SurfaceMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.3, 1.0, 0.5)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(mesh.boundary_loops().len(), 1);
        assert_eq!(mesh.boundary_loops()[0].len(), 3);
        let [a, b, c] = mesh.corners(0);
        let centroid = (a + b + c) / 3.0;
        for (ei, e) in mesh.edges().iter().enumerate() {
            let f = mesh.edge_frame(ei).unwrap();
            assert!(f.nu2.is_none());
            let mid = 0.5 * (mesh.positions()[e.vertices[0]] + mesh.positions()[e.vertices[1]]);
            assert!(f.nu1.dot(&(centroid - mid)) < 0.0);
            assert!(f.nu1.dot(&f.tau).abs() < 1e-14);
            assert!(f.nu1.dot(&mesh.normal(0)).abs() < 1e-14);
        }
    }

    #[test]
    fn frame_index_out_of_range() {
        let mesh = shapes::tetrahedron();
        assert!(matches!(mesh.edge_frame(6), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn inconsistent_winding_is_repaired() {
        let good = shapes::tetrahedron();
        let mut tris = good.triangles().to_vec();
        tris[2].swap(0, 1);
        let repaired = SurfaceMesh::new(good.positions().to_vec(), tris).unwrap();
        assert_eq!(repaired.flipped_triangles(), 1);
        for e in repaired.edges() {
            assert!(e.second.is_some());
        }
    }

    #[test]
    fn rejects_non_manifold_and_degenerate() {
        let p = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let err = SurfaceMesh::new(p.clone(), vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]).unwrap_err();
        assert!(matches!(err, Error::NonManifold(0, 1)));
        let flat = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)];
        assert!(matches!(SurfaceMesh::new(flat, vec![[0, 1, 2]]), Err(Error::DegenerateTriangle(0))));
    }

    #[test]
    fn mobius_strip_is_rejected() {
        let n = 8;
        let mut p = Vec::new();
        for i in 0..n {
            let u = std::f64::consts::TAU * i as f64 / n as f64;
            for s in [-0.3, 0.3] {
                let r = 1.0 + s * (u / 2.0).cos();
                p.push(Vec3::new(r * u.cos(), r * u.sin(), s * (u / 2.0).sin()));
            }
        }
        let mut tris = Vec::new();
        for i in 0..n {
            let a = 2 * i;
            let b = 2 * i + 1;
            let (c, d) = if i + 1 < n { (2 * i + 2, 2 * i + 3) } else { (1, 0) };
            tris.push([a, c, b]);
            tris.push([b, c, d]);
        }
        assert!(matches!(SurfaceMesh::new(p, tris), Err(Error::NonOrientable)));
    }

    #[test]
    fn disconnected_components_are_counted() {
        let a = shapes::tetrahedron();
        let mut p = a.positions().to_vec();
        let mut t = a.triangles().to_vec();
        let off = p.len();
        p.extend(a.positions().iter().map(|x| x + Vec3::new(5.0, 0.0, 0.0)));
        t.extend(a.triangles().iter().map(|tri| tri.map(|v| v + off)));
        let mesh = SurfaceMesh::new(p, t).unwrap();
        assert_eq!(mesh.n_components(), 2);
        assert!(matches!(mesh.require_connected(), Err(Error::DisconnectedMesh(2))));
    }
}
