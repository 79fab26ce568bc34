//! Constructed test surfaces.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use super::{SurfaceMesh, Vec3};

fn build(positions: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> SurfaceMesh {
    SurfaceMesh::new(positions, triangles).expect("constructed surface is valid")
}

pub fn tetrahedron() -> SurfaceMesh {
    build(
        vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

pub fn flat_triangle() -> SurfaceMesh {
    build(
        vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
        vec![[0, 1, 2]],
    )
}

/// Unit square in the plane z = 0 split into `2·nx·ny` triangles.
pub fn flat_grid(nx: usize, ny: usize) -> SurfaceMesh {
    assert!(nx >= 1 && ny >= 1);
    let mut p = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            p.push(Vec3::new(i as f64 / nx as f64, j as f64 / ny as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut t = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            t.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            t.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(p, t)
}

/// Unit icosphere after `level` midpoint subdivisions.
pub fn icosphere(level: usize) -> SurfaceMesh {
    let (p, t) = icosphere_raw(level);
    build(p, t)
}

fn icosphere_raw(level: usize) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut p: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut t: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, p: &mut Vec<Vec3>| -> usize {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                p.push((0.5 * (p[a] + p[b])).normalize());
                p.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * t.len());
        for [a, b, c] in t {
            let ab = midpoint(a, b, &mut p);
            let bc = midpoint(b, c, &mut p);
            let ca = midpoint(c, a, &mut p);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        t = next;
    }
    (p, t)
}

/// Unit icosphere with the vertex stars around up to six axis directions
/// (`+x, −x, +y, −y, +z, −z`) removed, leaving `holes` boundary loops.
pub fn sphere_with_holes(level: usize, holes: usize) -> SurfaceMesh {
    assert!(level >= 1 && holes <= 6);
    let (p, t) = icosphere_raw(level);
    let dirs = [
        Vec3::x(),
        -Vec3::x(),
        Vec3::y(),
        -Vec3::y(),
        Vec3::z(),
        -Vec3::z(),
    ];
    let centers: Vec<usize> = dirs[..holes]
        .iter()
        .map(|d| {
            (0..p.len())
                .max_by(|&a, &b| p[a].dot(d).total_cmp(&p[b].dot(d)))
                .unwrap()
        })
        .collect();
    let t = t.into_iter().filter(|tri| !tri.iter().any(|v| centers.contains(v))).collect();
    build(p, t)
}

fn torus_raw(n: usize, m: usize, major: f64, minor: f64) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    assert!(n >= 3 && m >= 3, "a structured torus needs at least 3x3 cells");
    let mut p = Vec::with_capacity(n * m);
    for i in 0..n {
        let u = TAU * (i as f64 - 0.5) / n as f64;
        for j in 0..m {
            let v = TAU * (j as f64 - 0.5) / m as f64;
            let r = major + minor * v.cos();
            p.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % n) * m + (j % m);
    let mut t = Vec::with_capacity(2 * n * m);
    for i in 0..n {
        for j in 0..m {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            t.push([a, b, c]);
            t.push([a, c, d]);
        }
    }
    (p, t)
}

/// Structured `n × m` torus; cell `(0, 0)` is centred on the outer equator at
/// `+x`.
pub fn torus(n: usize, m: usize, major: f64, minor: f64) -> SurfaceMesh {
    let (p, t) = torus_raw(n, m, major, minor);
    build(p, t)
}

/// Two structured tori joined by a short square tube (connected sum).
pub fn genus_two(n: usize, m: usize) -> SurfaceMesh {
    let (major, minor) = (1.0, 0.4);
    let (pa, ta) = torus_raw(n, m, major, minor);
    let shift = 2.0 * (major + minor) + 0.6;
    let nv = pa.len();
    let mut p = pa.clone();
    p.extend(pa.iter().map(|x| Vec3::new(shift - x.x, x.y, x.z)));
    // Cell (0,0) is triangles 0 and 1 with corners 0, m, m+1, 1.
    let corners = [0, m, m + 1, 1];
    let mut t: Vec<[usize; 3]> = ta[2..].to_vec();
    t.extend(ta[2..].iter().map(|tri| tri.map(|v| v + nv)));
    for k in 0..4 {
        let (a0, a1) = (corners[k], corners[(k + 1) % 4]);
        let (b0, b1) = (a0 + nv, a1 + nv);
        t.push([a0, a1, b1]);
        t.push([a0, b1, b0]);
    }
    build(p, t)
}

fn trefoil(s: f64) -> (Vec3, Vec3) {
    let c = Vec3::new(s.sin() + 2.0 * (2.0 * s).sin(), s.cos() - 2.0 * (2.0 * s).cos(), -(3.0 * s).sin());
    let d = Vec3::new(
        s.cos() + 4.0 * (2.0 * s).cos(),
        -s.sin() + 4.0 * (2.0 * s).sin(),
        -3.0 * (3.0 * s).cos(),
    );
    (c, d.normalize())
}

/// Tube of the given radius around a trefoil knot, `n_along × n_around`
/// cells, with a rotation-minimizing cross-section frame.
pub fn trefoil_tube(n_along: usize, n_around: usize, radius: f64) -> SurfaceMesh {
    assert!(n_along >= 3 && n_around >= 3);
    let samples: Vec<(Vec3, Vec3)> = (0..=n_along).map(|i| trefoil(TAU * i as f64 / n_along as f64)).collect();
    // Double-reflection transport of the normal.
    let (_, t0) = samples[0];
    let seed = if t0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let mut normals = vec![(seed - t0 * t0.dot(&seed)).normalize()];
    for i in 0..n_along {
        let (x0, ta) = samples[i];
        let (x1, tb) = samples[i + 1];
        let r = normals[i];
        let v1 = x1 - x0;
        let c1 = v1.dot(&v1);
        let r_l = r - v1 * (2.0 / c1) * v1.dot(&r);
        let t_l = ta - v1 * (2.0 / c1) * v1.dot(&ta);
        let v2 = tb - t_l;
        let c2 = v2.dot(&v2);
        let next = if c2 > 1e-30 { r_l - v2 * (2.0 / c2) * v2.dot(&r_l) } else { r_l };
        normals.push(next.normalize());
    }
    // Spread the closure mismatch evenly along the knot.
    let end = normals[n_along];
    let b0 = t0.cross(&normals[0]);
    let mismatch = end.dot(&b0).atan2(end.dot(&normals[0]));
    let mut p = Vec::with_capacity(n_along * n_around);
    for i in 0..n_along {
        let (x, t) = samples[i];
        let angle = -mismatch * i as f64 / n_along as f64;
        let nrm = normals[i];
        let bin = t.cross(&nrm);
        let (n_rot, b_rot) = (
            nrm * angle.cos() + bin * angle.sin(),
            -nrm * angle.sin() + bin * angle.cos(),
        );
        for j in 0..n_around {
            let phi = TAU * j as f64 / n_around as f64 + PI / n_around as f64;
            p.push(x + radius * (phi.cos() * n_rot + phi.sin() * b_rot));
        }
    }
    let id = |i: usize, j: usize| (i % n_along) * n_around + (j % n_around);
    let mut t = Vec::new();
    for i in 0..n_along {
        for j in 0..n_around {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            t.push([a, b, c]);
            t.push([a, c, d]);
        }
    }
    build(p, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        let m = icosphere(2);
        assert_eq!(m.n_triangles(), 320);
        assert_eq!(m.n_vertices(), 162);
    }

    #[test]
    fn trefoil_tube_is_not_self_intersecting_at_vertices() {
        let m = trefoil_tube(48, 8, 0.35);
        let p = m.positions();
        let mut dmin = f64::INFINITY;
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                dmin = dmin.min((p[a] - p[b]).norm());
            }
        }
        assert!(dmin > 0.05, "closest vertex pair {dmin}");
    }
}
