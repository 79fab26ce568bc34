//! Writes the sample meshes used by the configs in `configs/`.
//!
//! `cargo run --example write_meshes -- <dir>`

use std::path::PathBuf;

use surfhodge::mesh::{shapes, write_off};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "meshes".into()));
    std::fs::create_dir_all(&dir)?;
    let meshes = [
        ("tetrahedron.off", shapes::tetrahedron()),
        ("icosphere.off", shapes::icosphere(1)),
        ("torus.off", shapes::torus(8, 6, 2.0, 0.8)),
        ("genus_two.off", shapes::genus_two(4, 4)),
        ("sphere_four_holes.off", shapes::sphere_with_holes(1, 4)),
        ("trefoil.off", shapes::trefoil_tube(24, 5, 0.6)),
    ];
    for (name, m) in meshes {
        std::fs::write(dir.join(name), write_off(&m))?;
        println!("{name}: {} vertices, {} triangles", m.n_vertices(), m.n_triangles());
    }
    Ok(())
}
