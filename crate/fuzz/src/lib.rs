//! Target bodies, shared by the fuzz binaries and the corpus replay test.

use surfhodge::config::{Expr, SimulationConfig};
use surfhodge::hodge::HarmonicBasis;
use surfhodge::mesh::{analyze_topology, parse_obj, parse_off, write_off, RawMesh, SurfaceMesh};

const MAX_INPUT: usize = 1 << 16;

fn text(data: &[u8]) -> Option<&str> {
    if data.len() > MAX_INPUT {
        return None;
    }
    std::str::from_utf8(data).ok()
}

fn build(raw: RawMesh) {
    let Ok(mesh) = SurfaceMesh::new(raw.0, raw.1) else { return };
    let topo = analyze_topology(&mesh);
    assert_eq!(topo.n_triangles, mesh.n_triangles());
    let again = parse_off(&write_off(&mesh)).expect("written OFF parses");
    assert_eq!(again.1.len(), mesh.n_triangles());
}

pub fn off(data: &[u8]) {
    if let Some(raw) = text(data).and_then(|s| parse_off(s).ok()) {
        build(raw);
    }
}

pub fn obj(data: &[u8]) {
    if let Some(raw) = text(data).and_then(|s| parse_obj(s).ok()) {
        build(raw);
    }
}

pub fn config(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(c) = SimulationConfig::from_toml(s) {
        let back = SimulationConfig::from_toml(&c.to_toml()).expect("written config parses");
        assert_eq!(back, c);
        let f = c.forcing().expect("validated forcing builds");
        let _ = f.eval(surfhodge::mesh::Vec3::new(0.1, -0.2, 0.3), 0.5);
    }
}

pub fn expression(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(e) = s.parse::<Expr>() {
        let _ = e.eval(0.5, -1.0, 2.0, 0.25);
        let _ = e.uses_time();
    }
}

pub fn basis(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(b) = HarmonicBasis::from_json(s) {
        let back = HarmonicBasis::from_json(&b.to_json().expect("basis serializes")).expect("written basis parses");
        assert_eq!(back, b);
    }
}
