//! ASCII OFF and OBJ readers.
//!
//! OFF: blank lines and everything after `#` are ignored. The first token is
//! `OFF`; the vertex, face and edge counts follow (on the same line or the
//! next). Then one line per vertex with at least three coordinates, then one
//! line per face `n i₀ … i_{n−1}` with 0-based indices; trailing tokens (colors)
//! are ignored and `n ≠ 3` is rejected.
//!
//! OBJ: `v x y z [w]` adds a vertex, `f a b c` adds a triangle. Face tokens may
//! be `i`, `i/t`, `i//n` or `i/t/n`; only `i` is used. Indices are 1-based,
//! negative indices count back from the last vertex read. All other records
//! are ignored.

use std::path::Path;
use std::str::FromStr;

use super::{SurfaceMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub type RawMesh = (Vec<Vec3>, Vec<[usize; 3]>);

pub fn load_mesh(path: &Path, format: Option<MeshFormat>) -> Result<SurfaceMesh> {
    let format = format
        .or_else(|| MeshFormat::from_path(path))
        .ok_or_else(|| Error::parse(0, format!("cannot infer mesh format of {}", path.display())))?;
    let text = std::fs::read_to_string(path)?;
    let (positions, triangles) = match format {
        MeshFormat::Off => parse_off(&text)?,
        MeshFormat::Obj => parse_obj(&text)?,
    };
    SurfaceMesh::new(positions, triangles)
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn number<T: FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::parse(line, format!("invalid number '{tok}'")))
}

fn coordinate(tok: &str, line: usize) -> Result<f64> {
    let x: f64 = number(tok, line)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::parse(line, "non-finite coordinate"))
    }
}

pub fn parse_off(text: &str) -> Result<RawMesh> {
    let mut tokens_by_line = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty());

    let (line, header) = tokens_by_line.next().ok_or_else(|| Error::parse(0, "empty file"))?;
    if header[0] != "OFF" {
        return Err(Error::parse(line, "missing OFF header"));
    }
    let counts = if header.len() > 1 {
        (line, header[1..].to_vec())
    } else {
        tokens_by_line.next().ok_or_else(|| Error::parse(line, "missing counts line"))?
    };
    let (cline, ctoks) = counts;
    if ctoks.len() < 2 {
        return Err(Error::parse(cline, "counts line needs vertex and face counts"));
    }
    let nv: usize = number(ctoks[0], cline)?;
    let nf: usize = number(ctoks[1], cline)?;

    let mut positions = Vec::with_capacity(nv.min(1 << 20));
    for _ in 0..nv {
        let (l, toks) = tokens_by_line.next().ok_or_else(|| Error::parse(cline, "missing vertex lines"))?;
        if toks.len() < 3 {
            return Err(Error::parse(l, "vertex needs three coordinates"));
        }
        positions.push(Vec3::new(coordinate(toks[0], l)?, coordinate(toks[1], l)?, coordinate(toks[2], l)?));
    }
    let mut triangles = Vec::with_capacity(nf.min(1 << 20));
    for _ in 0..nf {
        let (l, toks) = tokens_by_line.next().ok_or_else(|| Error::parse(cline, "missing face lines"))?;
        let n: usize = number(toks[0], l)?;
        if n != 3 {
            return Err(Error::NonTriangle { line: l, count: n });
        }
        if toks.len() < 4 {
            return Err(Error::parse(l, "face line too short"));
        }
        let mut tri = [0usize; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let v: usize = number(toks[k + 1], l)?;
            if v >= nv {
                return Err(Error::parse(l, format!("vertex index {v} out of range")));
            }
            *slot = v;
        }
        triangles.push(tri);
    }
    Ok((positions, triangles))
}

pub fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut toks = strip_comment(raw).split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(Error::parse(line, "vertex needs three coordinates"));
                }
                positions.push(Vec3::new(
                    coordinate(c[0], line)?,
                    coordinate(c[1], line)?,
                    coordinate(c[2], line)?,
                ));
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(Error::NonTriangle { line, count: refs.len() });
                }
                let mut tri = [0usize; 3];
                for (slot, r) in tri.iter_mut().zip(refs) {
                    let idx = r.split('/').next().unwrap_or("");
                    let v: i64 = number(idx, line)?;
                    let n = positions.len() as i64;
                    let resolved = match v {
                        v if v > 0 && v <= n => v - 1,
                        v if v < 0 && -v <= n => n + v,
                        _ => return Err(Error::parse(line, format!("vertex index {v} out of range"))),
                    };
                    *slot = resolved as usize;
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    Ok((positions, triangles))
}

/// Writes an OFF file that [`parse_off`] reads back exactly.
pub fn write_off(mesh: &SurfaceMesh) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "OFF");
    let _ = writeln!(s, "{} {} {}", mesh.n_vertices(), mesh.n_triangles(), mesh.n_edges());
    for p in mesh.positions() {
        let _ = writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::analyze_topology;

    const TETRA_OFF: &str = "OFF\n# regular tetrahedron\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";

    #[test]
    fn reads_tetrahedron_off() {
        let (p, t) = parse_off(TETRA_OFF).unwrap();
        let mesh = SurfaceMesh::new(p, t).unwrap();
        let topo = analyze_topology(&mesh);
        assert_eq!((topo.n_vertices, topo.n_edges, topo.n_triangles), (4, 6, 4));
    }

    #[test]
    fn off_counts_on_header_line_and_colors() {
        let text = "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2 255 0 0\n";
        let (p, t) = parse_off(text).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(t, vec![[0, 1, 2]]);
    }

    #[test]
    fn off_rejects_quads_and_garbage() {
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        assert!(matches!(parse_off(quad), Err(Error::NonTriangle { count: 4, .. })));
        assert!(matches!(parse_off("PLY\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\n3 1 0\n0 0 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\n1 0 0\nnan 0 0\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn obj_with_slashes_and_negative_indices() {
        let text = "# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/2/1 3/3/1\nf -4//1 -2//1 -1//1\n";
        let (p, t) = parse_obj(text).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(t, vec![[0, 1, 2], [0, 2, 3]]);
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse_obj(quad), Err(Error::NonTriangle { count: 4, line: 5 })));
        assert!(matches!(parse_obj("v 0 0 0\nf 1 2 3\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn torus_obj_counts() {
        let mesh = crate::mesh::shapes::torus(3, 3, 1.0, 0.4);
        let mut obj = String::new();
        for p in mesh.positions() {
            obj.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
        }
        for t in mesh.triangles() {
            obj.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        let (p, t) = parse_obj(&obj).unwrap();
        let topo = analyze_topology(&SurfaceMesh::new(p, t).unwrap());
        assert_eq!((topo.n_vertices, topo.n_edges, topo.n_triangles), (9, 27, 18));
        assert_eq!(topo.n_boundary_edges, 0);
    }

    #[test]
    fn off_roundtrip_is_exact() {
        let mesh = crate::mesh::shapes::icosphere(1);
        let (p, t) = parse_off(&write_off(&mesh)).unwrap();
        assert_eq!(p, mesh.positions());
        assert_eq!(t, mesh.triangles());
    }
}
