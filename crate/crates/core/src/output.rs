//! VTK and CSV writers.
//!
//! VTK files are legacy ASCII `POLYDATA`: `POINTS`, `POLYGONS`, vertex
//! scalars under `POINT_DATA` and per-triangle vectors (sampled at the
//! centroid) under `CELL_DATA`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fespace::{FeField, FeSpace};
use crate::mesh::{SurfaceMesh, Vec3};

/// Field value at each triangle centroid.
pub fn cell_vectors(space: &std::sync::Arc<FeSpace>, coeffs: &[f64]) -> Result<Vec<Vec3>> {
    let f = FeField::new(space.clone(), coeffs.to_vec())?;
    Ok((0..space.mesh().n_triangles()).map(|t| f.value_vector(t, 1.0 / 3.0, 1.0 / 3.0)).collect())
}

/// Scalar field value at each mesh vertex.
pub fn vertex_values(field: &FeField) -> Vec<f64> {
    let space = field.space();
    let mesh = space.mesh();
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut out = vec![f64::NAN; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            if !out[v].is_nan() {
                continue;
            }
            let p = mesh.positions()[v];
            let c = corners
                .iter()
                .min_by(|a, b| {
                    let da = (space.geometry(t).map(a[0], a[1]) - p).norm();
                    let db = (space.geometry(t).map(b[0], b[1]) - p).norm();
                    da.total_cmp(&db)
                })
                .expect("three corners");
            out[v] = field.value_scalar(t, c[0], c[1]);
        }
    }
    out
}

pub struct VtkData<'a> {
    pub title: &'a str,
    pub point_scalars: Vec<(&'a str, Vec<f64>)>,
    pub cell_vectors: Vec<(&'a str, Vec<Vec3>)>,
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Config(format!("invalid VTK array name '{name}'")));
    }
    Ok(())
}

pub fn write_vtk(w: &mut impl Write, mesh: &SurfaceMesh, data: &VtkData) -> Result<()> {
    let title: String = data.title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(w, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.positions() {
        writeln!(w, "{:e} {:e} {:e}", p.x, p.y, p.z)?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "POLYGONS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    if !data.point_scalars.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, vals) in &data.point_scalars {
            check_name(name)?;
            if vals.len() != mesh.n_vertices() {
                return Err(Error::DimensionMismatch(format!("point array '{name}' has {} values", vals.len())));
            }
            writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v:e}")?;
            }
        }
    }
    if !data.cell_vectors.is_empty() {
        writeln!(w, "CELL_DATA {nt}")?;
        for (name, vals) in &data.cell_vectors {
            check_name(name)?;
            if vals.len() != nt {
                return Err(Error::DimensionMismatch(format!("cell array '{name}' has {} values", vals.len())));
            }
            writeln!(w, "VECTORS {name} double")?;
            for v in vals {
                writeln!(w, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
            }
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, mesh: &SurfaceMesh, data: &VtkData) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk(&mut w, mesh, data)?;
    w.flush()?;
    Ok(())
}

/// One row of the time series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub kinetic_energy: f64,
    /// `‖u_ℍ‖_{L²}`
    pub harmonic_norm: f64,
    /// `‖rot ψ‖_{L²}`
    pub rot_norm: f64,
    /// `‖div u‖_{L²}`
    pub divergence_norm: f64,
    pub h_coeffs: Vec<f64>,
}

/// Columns `t,kinetic_energy,harmonic_norm,rot_norm,divergence_norm,h_1..h_b`.
pub fn write_series(w: impl Write, rows: &[SeriesRow], b1: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["t", "kinetic_energy", "harmonic_norm", "rot_norm", "divergence_norm"].map(String::from).to_vec();
    header.extend((1..=b1).map(|i| format!("h_{i}")));
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        if r.h_coeffs.len() != b1 {
            return Err(Error::DimensionMismatch(format!("row with {} harmonic coefficients, expected {b1}", r.h_coeffs.len())));
        }
        let mut rec = vec![r.t, r.kinetic_energy, r.harmonic_norm, r.rot_norm, r.divergence_norm];
        rec.extend(&r.h_coeffs);
        out.write_record(rec.iter().map(|x| format!("{x:e}"))).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a file written by [`write_series`].
pub fn read_series(r: impl std::io::Read) -> Result<Vec<SeriesRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let b1 = rdr.headers().map_err(csv_err)?.len().saturating_sub(5);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let v: Vec<f64> = rec.iter().map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|e| Error::Config(format!("csv: {e}")))?;
        if v.len() != b1 + 5 {
            return Err(Error::Config("csv: ragged row".into()));
        }
        rows.push(SeriesRow { t: v[0], kinetic_energy: v[1], harmonic_norm: v[2], rot_norm: v[3], divergence_norm: v[4], h_coeffs: v[5..].to_vec() });
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fespace::{Constraint, SpaceKind};
    use crate::mesh::shapes;

    #[test]
    fn vtk_layout() {
        let mesh = shapes::tetrahedron();
        let mut buf = Vec::new();
        let data = VtkData {
            title: "test",
            point_scalars: vec![("psi", vec![1.0, 2.0, 3.0, 4.0])],
            cell_vectors: vec![("u", vec![Vec3::x(); 4]), ("u_rot", vec![Vec3::zeros(); 4])],
        };
        write_vtk(&mut buf, &mesh, &data).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[3], "DATASET POLYDATA");
        assert_eq!(lines[4], "POINTS 4 double");
        assert_eq!(lines[9], "POLYGONS 4 16");
        assert!(s.contains("POINT_DATA 4\nSCALARS psi double 1\nLOOKUP_TABLE default\n1e0\n"));
        assert!(s.contains("CELL_DATA 4\nVECTORS u double\n1e0 0e0 0e0\n"));
        assert_eq!(s.matches("VECTORS").count(), 2);
    }

    #[test]
    fn vtk_rejects_bad_arrays() {
        let mesh = shapes::tetrahedron();
        let short = VtkData { title: "t", point_scalars: vec![("psi", vec![0.0; 3])], cell_vectors: vec![] };
        assert!(write_vtk(&mut Vec::new(), &mesh, &short).is_err());
        let spaced = VtkData { title: "t", point_scalars: vec![], cell_vectors: vec![("a b", vec![Vec3::zeros(); 4])] };
        assert!(write_vtk(&mut Vec::new(), &mesh, &spaced).is_err());
    }

    #[test]
    fn vertex_values_match_every_incident_triangle() {
        let mesh = Arc::new(shapes::flat_grid(3, 2));
        let s = Arc::new(FeSpace::new(&mesh, SpaceKind::Lagrange, 2, Constraint::None).unwrap());
        let coeffs: Vec<f64> = (0..s.total_dofs()).map(|i| (i as f64 * 0.7).sin()).collect();
        let f = FeField::new(s.clone(), coeffs).unwrap();
        let vals = vertex_values(&f);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for c in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]] {
                let p = s.geometry(t).map(c[0], c[1]);
                let v = tri.iter().find(|&&v| (mesh.positions()[v] - p).norm() < 1e-12).unwrap();
                assert!((vals[*v] - f.value_scalar(t, c[0], c[1])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            SeriesRow { t: 0.0, kinetic_energy: 1.5, harmonic_norm: 0.25, rot_norm: 1.0, divergence_norm: 1e-14, h_coeffs: vec![0.1, -0.2] },
            SeriesRow { t: 0.1, kinetic_energy: 1.25, harmonic_norm: 0.5, rot_norm: 0.75, divergence_norm: 0.0, h_coeffs: vec![0.3, 1e-300] },
        ];
        let mut buf = Vec::new();
        write_series(&mut buf, &rows, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,kinetic_energy,harmonic_norm,rot_norm,divergence_norm,h_1,h_2\n"));
        assert_eq!(read_series(buf.as_slice()).unwrap(), rows);
        assert!(write_series(Vec::new(), &rows, 1).is_err());
    }
}
