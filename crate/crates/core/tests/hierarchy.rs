//! Harmonic spaces of different degrees carry the same cohomology: the
//! lowest-order harmonic fields, embedded into `BDM^k`, project onto `H^k`
//! with full rank.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use surfhodge::assembly::divergence_norm;
use surfhodge::fespace::{rule, FeSpace};
use surfhodge::hodge::{HodgeContext, DEFAULT_TOL};
use surfhodge::linalg::{factorize, FactorKind, TripletBuilder};
use surfhodge::mesh::{shapes, SurfaceMesh};

/// `C[i, j] = ∫ φ^fine_i · φ^coarse_j`.
fn cross_mass(fine: &FeSpace, coarse: &FeSpace) -> surfhodge::linalg::SparseMatrix {
    let q = rule(2 * fine.degree() + 2);
    let mut b = TripletBuilder::new(fine.total_dofs(), coarse.total_dofs());
    for t in 0..fine.mesh().n_triangles() {
        let det = fine.geometry(t).det;
        for (p, w) in q.points.iter().zip(&q.weights) {
            let f = fine.eval_vector(t, p[1], p[2]);
            let c = coarse.eval_vector(t, p[1], p[2]);
            for (df, vf) in fine.local_dofs(t).iter().zip(&f) {
                let Some(i) = df.global else { continue };
                for (dc, vc) in coarse.local_dofs(t).iter().zip(&c) {
                    let Some(j) = dc.global else { continue };
                    b.push(i, j, w * det * vf.value.dot(&vc.value));
                }
            }
        }
    }
    b.build()
}

fn embedded_rank(mesh: SurfaceMesh, k: usize, seed: u64) -> (usize, f64, f64) {
    let mesh = Arc::new(mesh);
    let c0 = HodgeContext::new(&mesh, 0).unwrap();
    let ck = HodgeContext::new(&mesh, k).unwrap();
    let h0 = c0.harmonic_basis(seed, DEFAULT_TOL).unwrap();
    let hk = ck.harmonic_basis(seed.wrapping_add(1), DEFAULT_TOL).unwrap();
    let cm = cross_mass(ck.velocity_space(), c0.velocity_space());
    let mk = factorize(ck.mass(), FactorKind::Spd).unwrap();
    let b1 = h0.len();
    let mut p = DMatrix::<f64>::zeros(b1, b1);
    let mut worst_div: f64 = 0.0;
    for (j, h) in h0.vectors.iter().enumerate() {
        // Exact embedding: RT0 ⊂ BDM^k, so the L² projection reproduces h.
        let x = mk.solve(&cm.mul_vec(h)).unwrap();
        let (d, n) = divergence_norm(ck.velocity_space(), &x);
        worst_div = worst_div.max(d / n);
        let mx = ck.mass().mul_vec(&x);
        for (i, g) in hk.vectors.iter().enumerate() {
            p[(i, j)] = g.iter().zip(&mx).map(|(a, b)| a * b).sum();
        }
    }
    let smin = if b1 == 0 { 1.0 } else { p.singular_values().min() };
    (b1, smin, worst_div)
}

#[test]
fn sphere_has_nothing_to_embed() {
    assert_eq!(embedded_rank(shapes::icosphere(1), 2, 1).0, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lowest_order_harmonics_span_higher_order_ones(seed in 0u64..1000, k in 1usize..=2, which in 0usize..3) {
        let (mesh, b1) = match which {
            0 => (shapes::torus(5, 4, 1.0, 0.4), 2),
            1 => (shapes::sphere_with_holes(1, 3), 2),
            _ => (shapes::genus_two(4, 4), 4),
        };
        let (n, smin, div) = embedded_rank(mesh, k, seed);
        prop_assert_eq!(n, b1);
        prop_assert!(div < 1e-10, "embedded field divergence {}", div);
        prop_assert!(smin > 1e-2, "projection nearly singular: {}", smin);
    }
}
