use super::{edge_point, field_at, globals, scatter, triangle_degree, VectorTab};
use crate::error::{Error, Result};
use crate::fespace::{FeSpace, SpaceKind, VectorValue};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Vec3;
use crate::quadrature::EdgeRule;

/// Relative divergence accepted for the advecting field.
const DIV_TOL: f64 = 1e-8;

/// `‖div w‖_{L²}` and `‖w‖_{L²}` of a BDM coefficient vector.
pub fn divergence_norm(v: &FeSpace, w: &[f64]) -> (f64, f64) {
    let tab = VectorTab::new(v, triangle_degree(v.degree()));
    let (mut d2, mut w2) = (0.0, 0.0);
    for t in 0..v.mesh().n_triangles() {
        let det = v.geometry(t).det;
        for (q, &wq) in tab.rule.weights.iter().enumerate() {
            let vals = v.map_vector(t, &tab.samples[q]);
            let mut div = 0.0;
            let mut val = Vec3::zeros();
            for (d, b) in v.local_dofs(t).iter().zip(&vals) {
                if let Some(i) = d.global {
                    div += w[i] * b.divergence;
                    val += w[i] * b.value;
                }
            }
            d2 += wq * det * div * div;
            w2 += wq * det * val.norm_squared();
        }
    }
    (d2.sqrt(), w2.sqrt())
}

/// Upwind convection matrix `C[i, j] = c(w; φ_j, φ_i)` with
///
/// `c(w; u, v) = Σ_T −∫_T u·(∇v w) + ∫_∂T (w·ν_T) [(u_T·ν_T)(v_T·ν_T) + (u_{T*}·τ)(v_T·τ)]`
///
/// where `T*` is the element the flow leaves through the edge. On boundary
/// edges the exterior tangential trace is zero.
pub fn assemble_convection(v: &FeSpace, w: &[f64]) -> Result<SparseMatrix> {
    if v.kind() != SpaceKind::Bdm {
        return Err(Error::UnsupportedCombination("convection needs a BDM space".into()));
    }
    if w.len() != v.total_dofs() {
        return Err(Error::DimensionMismatch(format!("advecting field has {} of {} coefficients", w.len(), v.total_dofs())));
    }
    let mesh = v.mesh();
    let (dn, wn) = divergence_norm(v, w);
    let scale = wn / mesh.h_min();
    if dn > DIV_TOL * scale && dn > 1e-300 {
        return Err(Error::NotDivergenceFree(dn / scale));
    }
    let n = v.total_dofs();
    let nl = v.n_local();
    let mut builder = TripletBuilder::new(n, n);
    if w.iter().all(|&x| x == 0.0) {
        return Ok(builder.build());
    }
    let tab = VectorTab::new(v, triangle_degree(v.degree()) + v.degree());
    for t in 0..mesh.n_triangles() {
        let det = v.geometry(t).det;
        let mut k = vec![vec![0.0; nl]; nl];
        for (q, &wq) in tab.rule.weights.iter().enumerate() {
            let vals = v.map_vector(t, &tab.samples[q]);
            let (wv, _) = field_at(w, v, t, &vals);
            for i in 0..nl {
                let dv = vals[i].gradient * wv;
                for j in 0..nl {
                    k[i][j] -= wq * det * vals[j].value.dot(&dv);
                }
            }
        }
        let g = globals(v, t);
        scatter(&mut builder, &g, &g, &k);
    }

    let vr = v.vector_reference().expect("BDM reference");
    let rule = facet_rule(v.degree());
    for (e, edge) in mesh.edges().iter().enumerate() {
        let frame = mesh.edge_frame(e)?;
        let tau = frame.tau;
        let sides: Vec<(usize, usize)> = std::iter::once(edge.first).chain(edge.second).collect();
        let rows: Vec<Option<usize>> = sides.iter().flat_map(|s| globals(v, s.0)).collect();
        let m = rows.len();
        let mut k = vec![vec![0.0; m]; m];
        for (&s, &wq) in rule.points.iter().zip(&rule.weights) {
            let ds = wq * frame.length;
            let traces: Vec<Vec<VectorValue>> = sides
                .iter()
                .map(|&(t, l)| {
                    let (x, y) = edge_point(v, t, l, s);
                    v.map_vector(t, &vr.eval(x, y))
                })
                .collect();
            for (a, &(t, l)) in sides.iter().enumerate() {
                let nu = mesh.outward_conormal(t, l);
                let (wt, _) = field_at(w, v, t, &traces[a]);
                let wn = wt.dot(&nu);
                let off = a * nl;
                let other = 1 - a;
                for i in 0..nl {
                    let vi = traces[a][i].value;
                    let (vn, vt) = (vi.dot(&nu), vi.dot(&tau));
                    for j in 0..nl {
                        let uj = traces[a][j].value;
                        let mut c = uj.dot(&nu) * vn;
                        if wn > 0.0 {
                            c += uj.dot(&tau) * vt;
                        }
                        k[off + i][off + j] += ds * wn * c;
                    }
                    if wn <= 0.0 && sides.len() == 2 {
                        let ooff = other * nl;
                        for j in 0..nl {
                            let uj = traces[other][j].value;
                            k[off + i][ooff + j] += ds * wn * uj.dot(&tau) * vt;
                        }
                    }
                }
            }
        }
        scatter(&mut builder, &rows, &rows, &k);
    }
    Ok(builder.build())
}

/// Facet integrands are products of three degree-`k` traces.
fn facet_rule(k: usize) -> EdgeRule {
    EdgeRule::new(3 * k + 2)
}

/// `½ Σ_E ∫ |w·ν| ⟦u⟧_τ²`, which equals `c(w; u, u)` for divergence-free,
/// normal-continuous `w`. Boundary edges contribute
/// `½ (w·ν)(u·ν)² + ½ |w·ν| (u·τ)²`.
pub fn convection_energy(v: &FeSpace, w: &[f64], u: &[f64]) -> f64 {
    let mesh = v.mesh();
    let vr = v.vector_reference().expect("BDM reference");
    let rule = facet_rule(v.degree());
    let mut total = 0.0;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let frame = mesh.edge_frame(e).expect("valid edge");
        for (&s, &wq) in rule.points.iter().zip(&rule.weights) {
            let ds = wq * frame.length;
            let (t, l) = edge.first;
            let (x, y) = edge_point(v, t, l, s);
            let vals = v.map_vector(t, &vr.eval(x, y));
            let (w1, _) = field_at(w, v, t, &vals);
            let (u1, _) = field_at(u, v, t, &vals);
            let wn = w1.dot(&frame.nu1);
            match edge.second {
                Some((t2, l2)) => {
                    let (x, y) = edge_point(v, t2, l2, s);
                    let vals2 = v.map_vector(t2, &vr.eval(x, y));
                    let (u2, _) = field_at(u, v, t2, &vals2);
                    let jump = (u1 - u2).dot(&frame.tau);
                    total += 0.5 * ds * wn.abs() * jump * jump;
                }
                None => {
                    let ut = u1.dot(&frame.tau);
                    let un = u1.dot(&frame.nu1);
                    total += 0.5 * ds * wn * un * un + 0.5 * ds * wn.abs() * ut * ut;
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::assemble_rot_embedding;
    use crate::fespace::{interpolate_bdm, Constraint, FeSpace};
    use crate::linalg::dot;
    use crate::mesh::shapes;
    use rand::{RngExt, SeedableRng};

    #[test]
    fn zero_wind_gives_zero_matrix() {
        let mesh = Arc::new(shapes::torus(3, 3, 1.0, 0.4));
        let v = FeSpace::new(&mesh, SpaceKind::Bdm, 1, Constraint::ZeroNormalTrace).unwrap();
        let c = assemble_convection(&v, &vec![0.0; v.total_dofs()]).unwrap();
        assert_eq!(c.nnz(), 0);
    }

    #[test]
    fn rejects_divergent_wind() {
        let mesh = Arc::new(shapes::flat_grid(2, 2));
        let v = FeSpace::new(&mesh, SpaceKind::Bdm, 1, Constraint::None).unwrap();
        let w = interpolate_bdm(&v, |p| Vec3::new(p.x, p.y, 0.0)).unwrap();
        assert!(matches!(assemble_convection(&v, &w), Err(Error::NotDivergenceFree(_))));
    }

    #[test]
    fn energy_identity_and_stability() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for mesh in [Arc::new(shapes::torus(3, 4, 1.0, 0.4)), Arc::new(shapes::sphere_with_holes(1, 3))] {
            for k in 0..=2 {
                let c = if mesh.has_boundary() { Constraint::ZeroBoundaryTrace } else { Constraint::ZeroMean };
                let s = FeSpace::new(&mesh, SpaceKind::Lagrange, k + 1, c).unwrap();
                let v = FeSpace::new(&mesh, SpaceKind::Bdm, k, Constraint::ZeroNormalTrace).unwrap();
                let e = assemble_rot_embedding(&s, &v).unwrap();
                let psi: Vec<f64> = (0..s.total_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let w = e.mul_vec(&psi);
                let cm = assemble_convection(&v, &w).unwrap();
                let u: Vec<f64> = (0..v.total_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let cuu = dot(&u, &cm.mul_vec(&u));
                let scale = dot(&u, &u);
                assert!(cuu >= -1e-10 * scale, "k={k}: {cuu}");
                let expected = convection_energy(&v, &w, &u);
                assert!((cuu - expected).abs() < 1e-9 * (1.0 + expected.abs()), "k={k}: {cuu} vs {expected}");
            }
        }
    }

    #[test]
    fn constant_wind_on_flat_square_matches_hand_assembly() {
        // Two triangles of the unit square, w = (1, 0), RT0 fields. Each RT0
        // basis function is linear with ∇v = (div v / 2) I, so the element
        // term is −∫ (div φ_i / 2) φ_j·w. The hand version below evaluates the
        // same expression independently with a midpoint rule, exact for the
        // linear integrands.
        let mesh = Arc::new(shapes::flat_grid(1, 1));
        let v = FeSpace::new(&mesh, SpaceKind::Bdm, 0, Constraint::None).unwrap();
        let w = interpolate_bdm(&v, |_| Vec3::x()).unwrap();
        let c = assemble_convection(&v, &w).unwrap().to_dense();
        let n = v.total_dofs();
        let mut hand = nalgebra::DMatrix::<f64>::zeros(n, n);
        for t in 0..2 {
            let vals = v.eval_vector(t, 1.0 / 3.0, 1.0 / 3.0);
            let area = mesh.area(t);
            let g: Vec<usize> = v.local_dofs(t).iter().map(|d| d.global.unwrap()).collect();
            for i in 0..3 {
                for j in 0..3 {
                    hand[(g[i], g[j])] -= area * vals[i].divergence / 2.0 * vals[j].value.dot(&Vec3::x());
                }
            }
            // Facet terms with a 2-point Gauss rule per edge.
            for l in 0..3 {
                let nu = mesh.outward_conormal(t, l);
                let e = mesh.triangle_edges(t)[l];
                let f = mesh.edge_frame(e).unwrap();
                let wn = Vec3::x().dot(&nu);
                for s in [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()] {
                    let (x, y) = edge_point(&v, t, l, s);
                    let vt = v.eval_vector(t, x, y);
                    let other = if mesh.edges()[e].first.0 == t { mesh.edges()[e].second } else { Some(mesh.edges()[e].first) };
                    for i in 0..3 {
                        for j in 0..3 {
                            let normal = vt[j].value.dot(&nu) * vt[i].value.dot(&nu);
                            let own = if wn > 0.0 { vt[j].value.dot(&f.tau) * vt[i].value.dot(&f.tau) } else { 0.0 };
                            hand[(g[i], g[j])] += 0.5 * f.length * wn * (normal + own);
                        }
                        if let (true, Some((t2, l2))) = (wn <= 0.0, other) {
                            let (x2, y2) = edge_point(&v, t2, l2, s);
                            let v2 = v.eval_vector(t2, x2, y2);
                            for (j, d) in v.local_dofs(t2).iter().enumerate() {
                                hand[(g[i], d.global.unwrap())] +=
                                    0.5 * f.length * wn * v2[j].value.dot(&f.tau) * vt[i].value.dot(&f.tau);
                            }
                        }
                    }
                }
            }
        }
        assert!((c - hand).amax() < 1e-13);
    }
}
