//! Polynomial bases on the reference triangle `T̂ = conv{(0,0), (1,0), (0,1)}`.
//!
//! Every basis is stored as a coefficient matrix against a generating set
//! (monomials `xᵖ yᵠ` for scalars, vector monomials for BDM and the three
//! Raviart–Thomas generators for the lowest order flux space), obtained by
//! inverting the matrix of degree-of-freedom functionals applied to the
//! generators.

use nalgebra::{DMatrix, DVector};

use crate::quadrature::{shifted_legendre, EdgeRule, QuadratureRule};

/// Monomial exponents of total degree `≤ degree`, graded order.
pub fn monomials(degree: usize) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for d in 0..=degree as i32 {
        for q in 0..=d {
            out.push((d - q, q));
        }
    }
    out
}

fn mono_eval(e: (i32, i32), x: f64, y: f64) -> (f64, [f64; 2]) {
    let (p, q) = e;
    let v = x.powi(p) * y.powi(q);
    let dx = if p > 0 { p as f64 * x.powi(p - 1) * y.powi(q) } else { 0.0 };
    let dy = if q > 0 { q as f64 * x.powi(p) * y.powi(q - 1) } else { 0.0 };
    (v, [dx, dy])
}

/// Reference vertices in local order.
pub const VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Start point and direction of local edge `l` (from vertex `l+1` to `l+2`).
pub fn edge_geometry(l: usize) -> ([f64; 2], [f64; 2]) {
    let a = VERTICES[(l + 1) % 3];
    let b = VERTICES[(l + 2) % 3];
    (a, [b[0] - a[0], b[1] - a[1]])
}

/// Outward normal of local edge `l` scaled by the reference edge length.
pub fn scaled_edge_normal(l: usize) -> [f64; 2] {
    let (_, d) = edge_geometry(l);
    [d[1], -d[0]]
}

/// Scalar polynomial basis `φ_b = Σ_a C[a, b] m_a`.
#[derive(Debug, Clone)]
pub struct ScalarReference {
    pub degree: usize,
    exps: Vec<(i32, i32)>,
    coeffs: DMatrix<f64>,
}

impl ScalarReference {
    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Values and reference gradients of all basis functions at `(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        let n = self.dim();
        let mut val = vec![0.0; n];
        let mut grad = vec![[0.0; 2]; n];
        for (a, &e) in self.exps.iter().enumerate() {
            let (m, dm) = mono_eval(e, x, y);
            for b in 0..n {
                let c = self.coeffs[(a, b)];
                if c != 0.0 {
                    val[b] += c * m;
                    grad[b][0] += c * dm[0];
                    grad[b][1] += c * dm[1];
                }
            }
        }
        (val, grad)
    }

    /// Nodal Lagrange basis on equispaced nodes: vertices, then `degree − 1`
    /// nodes per local edge in local edge direction, then interior nodes.
    pub fn lagrange(degree: usize) -> Self {
        assert!(degree >= 1);
        let nodes = lagrange_nodes(degree);
        let exps = monomials(degree);
        let n = exps.len();
        let v = DMatrix::from_fn(n, n, |c, a| mono_eval(exps[a], nodes[c][0], nodes[c][1]).0);
        let coeffs = v.try_inverse().expect("unisolvent Lagrange nodes");
        ScalarReference { degree, exps, coeffs }
    }

    /// Basis of degree `degree` orthonormal in `L²(T̂)`.
    pub fn orthonormal(degree: usize) -> Self {
        let exps = monomials(degree);
        let n = exps.len();
        let rule = QuadratureRule::triangle(2 * degree);
        let mut gram = DMatrix::zeros(n, n);
        for (pt, &w) in rule.points.iter().zip(&rule.weights) {
            let m: Vec<f64> = exps.iter().map(|&e| mono_eval(e, pt[1], pt[2]).0).collect();
            for a in 0..n {
                for b in 0..n {
                    gram[(a, b)] += w * m[a] * m[b];
                }
            }
        }
        let l = gram.cholesky().expect("monomial Gram matrix is SPD").l();
        let coeffs = l.transpose().try_inverse().expect("triangular factor is invertible");
        ScalarReference { degree, exps, coeffs }
    }

    /// Crouzeix–Raviart basis `φ_l = 1 − 2λ_l`, dual to the edge midpoints.
    pub fn crouzeix_raviart() -> Self {
        let exps = monomials(1);
        // Monomial order: 1, x, y. λ₀ = 1 − x − y, λ₁ = x, λ₂ = y.
        let coeffs = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 1.0, 2.0, -2.0, 0.0, 2.0, 0.0, -2.0]);
        ScalarReference { degree: 1, exps, coeffs }
    }
}

pub fn lagrange_nodes(degree: usize) -> Vec<[f64; 2]> {
    let m = degree as f64;
    let mut nodes: Vec<[f64; 2]> = VERTICES.to_vec();
    for l in 0..3 {
        let (a, d) = edge_geometry(l);
        for i in 1..degree {
            let s = i as f64 / m;
            nodes.push([a[0] + s * d[0], a[1] + s * d[1]]);
        }
    }
    for i in 1..degree {
        for j in 1..degree {
            if i + j < degree {
                nodes.push([i as f64 / m, j as f64 / m]);
            }
        }
    }
    nodes
}

/// Number of interior Lagrange nodes.
pub fn lagrange_interior(degree: usize) -> usize {
    if degree < 3 {
        0
    } else {
        (degree - 1) * (degree - 2) / 2
    }
}

/// Vector-valued polynomial generator: two scalar polynomials in monomial
/// coefficients.
#[derive(Debug, Clone)]
struct VectorGenerator {
    comps: [Vec<((i32, i32), f64)>; 2],
}

impl VectorGenerator {
    fn eval(&self, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for c in 0..2 {
            for &(e, coef) in &self.comps[c] {
                let (m, dm) = mono_eval(e, x, y);
                v[c] += coef * m;
                g[c][0] += coef * dm[0];
                g[c][1] += coef * dm[1];
            }
        }
        (v, g)
    }
}

/// Vector basis with edge-moment and interior-moment degrees of freedom.
///
/// Local dof `l·(k+1) + j` is `∫_{ê_l} v̂·n̂ L_j(s) dŝ` with `L_j` the shifted
/// Legendre polynomial and `s` running along the local edge direction. The
/// remaining dofs are moments against an `L²(T̂)`-orthonormal basis of the
/// interior bubbles `{v̂ ∈ ℙᵏ(T̂)² : v̂·n̂ = 0 on ∂T̂}`.
#[derive(Debug, Clone)]
pub struct VectorReference {
    pub degree: usize,
    generators: Vec<VectorGenerator>,
    coeffs: DMatrix<f64>,
}

/// Value, reference Jacobian `∂v̂_c/∂x̂_d`, and reference divergence.
#[derive(Debug, Clone, Copy, Default)]
pub struct VectorSample {
    pub value: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
}

impl VectorSample {
    pub fn div(&self) -> f64 {
        self.jacobian[0][0] + self.jacobian[1][1]
    }
}

impl VectorReference {
    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn n_edge_dofs(&self) -> usize {
        self.degree + 1
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.dim() - 3 * self.n_edge_dofs()
    }

    pub fn eval(&self, x: f64, y: f64) -> Vec<VectorSample> {
        let n = self.dim();
        let mut out = vec![VectorSample::default(); n];
        for (a, g) in self.generators.iter().enumerate() {
            let (v, jac) = g.eval(x, y);
            for (b, s) in out.iter_mut().enumerate() {
                let c = self.coeffs[(a, b)];
                if c == 0.0 {
                    continue;
                }
                for i in 0..2 {
                    s.value[i] += c * v[i];
                    for j in 0..2 {
                        s.jacobian[i][j] += c * jac[i][j];
                    }
                }
            }
        }
        out
    }

    /// BDM of degree `k ≥ 1`, or the lowest-order flux space (Raviart–Thomas
    /// `RT₀`, one constant flux per edge) for `k = 0`.
    pub fn bdm(k: usize) -> Self {
        let generators: Vec<VectorGenerator> = if k == 0 {
            vec![
                VectorGenerator { comps: [vec![((0, 0), 1.0)], vec![]] },
                VectorGenerator { comps: [vec![], vec![((0, 0), 1.0)]] },
                VectorGenerator { comps: [vec![((1, 0), 1.0)], vec![((0, 1), 1.0)]] },
            ]
        } else {
            let mut g = Vec::new();
            for e in monomials(k) {
                g.push(VectorGenerator { comps: [vec![(e, 1.0)], vec![]] });
                g.push(VectorGenerator { comps: [vec![], vec![(e, 1.0)]] });
            }
            g
        };
        let n = generators.len();
        let edge_rule = EdgeRule::new(2 * k + 2);
        let n_edge = 3 * (k + 1);
        let mut dofs = DMatrix::zeros(n, n);
        for l in 0..3 {
            let (a, d) = edge_geometry(l);
            let nrm = scaled_edge_normal(l);
            for (&s, &w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                let (x, y) = (a[0] + s * d[0], a[1] + s * d[1]);
                for (gi, g) in generators.iter().enumerate() {
                    let (v, _) = g.eval(x, y);
                    let flux = v[0] * nrm[0] + v[1] * nrm[1];
                    for j in 0..=k {
                        dofs[(l * (k + 1) + j, gi)] += w * flux * shifted_legendre(j, s);
                    }
                }
            }
        }
        if n > n_edge {
            let rule = QuadratureRule::triangle(2 * k);
            let vals: Vec<Vec<[f64; 2]>> = rule
                .points
                .iter()
                .map(|p| generators.iter().map(|g| g.eval(p[1], p[2]).0).collect())
                .collect();
            let mut gram = DMatrix::zeros(n, n);
            for (q, &w) in rule.weights.iter().enumerate() {
                for a in 0..n {
                    for b in 0..n {
                        let (va, vb) = (vals[q][a], vals[q][b]);
                        gram[(a, b)] += w * (va[0] * vb[0] + va[1] * vb[1]);
                    }
                }
            }
            let bubbles = bubble_basis(&dofs.rows(0, n_edge).into_owned(), &gram);
            // Interior functionals: v ↦ (v, b_m) on T̂.
            let interior = bubbles.transpose() * &gram;
            dofs.rows_mut(n_edge, n - n_edge).copy_from(&interior);
        }
        let coeffs = dofs.try_inverse().expect("BDM moment functionals are unisolvent");
        VectorReference { degree: k, generators, coeffs }
    }

    /// Local dof values of a reference field given by its samples on the
    /// element; `field(x, y)` must lie in the local space for exact
    /// interpolation.
    pub fn interpolate(&self, field: impl Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
        let k = self.degree;
        let mut out = vec![0.0; self.dim()];
        let edge_rule = EdgeRule::new(2 * k + 2);
        for l in 0..3 {
            let (a, d) = edge_geometry(l);
            let nrm = scaled_edge_normal(l);
            for (&s, &w) in edge_rule.points.iter().zip(&edge_rule.weights) {
                let v = field(a[0] + s * d[0], a[1] + s * d[1]);
                let flux = v[0] * nrm[0] + v[1] * nrm[1];
                for j in 0..=k {
                    out[l * (k + 1) + j] += w * flux * shifted_legendre(j, s);
                }
            }
        }
        let n_edge = 3 * (k + 1);
        if self.dim() > n_edge {
            // Interior moments: recover from the basis duality. The interior
            // functionals are (v, b_m); b_m expressed through the generators.
            let rule = QuadratureRule::triangle(2 * k + 2);
            let bub = self.bubbles();
            for (pt, &w) in rule.points.iter().zip(&rule.weights) {
                let v = field(pt[1], pt[2]);
                for (m, bm) in bub.iter().enumerate() {
                    let b = bm.iter().fold([0.0; 2], |acc, (gi, c)| {
                        let (gv, _) = self.generators[*gi].eval(pt[1], pt[2]);
                        [acc[0] + c * gv[0], acc[1] + c * gv[1]]
                    });
                    out[n_edge + m] += w * (v[0] * b[0] + v[1] * b[1]);
                }
            }
        }
        out
    }

    /// Interior bubble functions as sparse generator combinations, recovered
    /// from the interior rows of the inverse dof matrix.
    fn bubbles(&self) -> Vec<Vec<(usize, f64)>> {
        // The interior basis functions span the bubble space; the interior
        // functionals are the L²-moments against an orthonormal bubble basis.
        // Reconstruct that basis: for the interior block of the basis, the
        // Gram matrix G_ii satisfies (φ_i, b_m) = δ, so b = φ G⁻¹ restricted.
        let k = self.degree;
        let n_edge = 3 * (k + 1);
        let n = self.dim();
        let ni = n - n_edge;
        let rule = QuadratureRule::triangle(2 * k);
        let mut gram = DMatrix::<f64>::zeros(ni, ni);
        for (pt, &w) in rule.points.iter().zip(&rule.weights) {
            let s = self.eval(pt[1], pt[2]);
            for a in 0..ni {
                for b in 0..ni {
                    let (va, vb) = (s[n_edge + a].value, s[n_edge + b].value);
                    gram[(a, b)] += w * (va[0] * vb[0] + va[1] * vb[1]);
                }
            }
        }
        let ginv = gram.try_inverse().expect("bubble Gram matrix is invertible");
        (0..ni)
            .map(|m| {
                (0..n)
                    .map(|gi| {
                        let c: f64 = (0..ni).map(|a| self.coeffs[(gi, n_edge + a)] * ginv[(a, m)]).sum();
                        (gi, c)
                    })
                    .filter(|&(_, c)| c != 0.0)
                    .collect()
            })
            .collect()
    }
}

/// Orthonormal (in the generator Gram metric) basis of the nullspace of the
/// edge functionals.
fn bubble_basis(edge_dofs: &DMatrix<f64>, gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = edge_dofs.ncols();
    let svd = edge_dofs.clone().svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
    // Right singular vectors beyond the rank span the nullspace. nalgebra
    // returns a thin SVD, so complete the basis explicitly.
    let row_space = vt.rows(0, rank).transpose();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let mut v = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for c in 0..rank {
                let col = row_space.column(c);
                let proj = col.dot(&v);
                v -= proj * col;
            }
            for b in &basis {
                let proj = b.dot(&v);
                v -= proj * b;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            basis.push(v / nv);
        }
    }
    let z = DMatrix::from_columns(&basis);
    let g = z.transpose() * gram * &z;
    let l = g.cholesky().expect("bubble Gram is SPD").l();
    z * l.transpose().try_inverse().expect("invertible")
}
