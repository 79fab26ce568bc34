//! Gauss–Legendre rules on `[0, 1]` and collapsed (Duffy) product rules on the
//! reference triangle `{(x, y) : x, y ≥ 0, x + y ≤ 1}`.

/// Gauss–Legendre nodes and weights on `[0, 1]`; weights sum to 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        // Map from [-1, 1] to [0, 1].
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shifted Legendre polynomial `P_j(2s − 1)` on `[0, 1]`.
pub fn shifted_legendre(j: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    match j {
        0 => 1.0,
        _ => {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=j {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            p1
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(λ₀, λ₁, λ₂)`; reference coordinates are
    /// `(x, y) = (λ₁, λ₂)`.
    pub points: Vec<[f64; 3]>,
    /// Weights with respect to reference area; they sum to 1/2.
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    /// Positive-weight rule integrating all polynomials of degree
    /// `≤ exactness_degree` exactly.
    pub fn triangle(exactness_degree: usize) -> Self {
        // The collapse adds one to the polynomial degree in the η direction.
        let n = (exactness_degree + 3) / 2;
        let (g, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&eta, &we) in g.iter().zip(&w) {
            for (&xi, &wx) in g.iter().zip(&w) {
                let x = xi * (1.0 - eta);
                let y = eta;
                points.push([1.0 - x - y, x, y]);
                weights.push(wx * we * (1.0 - eta));
            }
        }
        QuadratureRule { points, weights, exactness_degree }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn reference_point(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }
}

/// Gauss rule on `[0, 1]` exact up to `exactness_degree`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl EdgeRule {
    pub fn new(exactness_degree: usize) -> Self {
        let (points, weights) = gauss_legendre(exactness_degree / 2 + 1);
        EdgeRule { points, weights, exactness_degree }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rules_integrate_monomials_exactly() {
        for deg in 0..=14 {
            let rule = QuadratureRule::triangle(deg);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    assert!((approx - exact).abs() < 1e-15, "deg {deg} x^{a} y^{b}: {approx} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn edge_rules() {
        for deg in 0..=15 {
            let rule = EdgeRule::new(deg);
            for a in 0..=deg as i32 {
                let approx: f64 = rule.points.iter().zip(&rule.weights).map(|(s, w)| w * s.powi(a)).sum();
                assert!((approx - 1.0 / (a + 1) as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shifted_legendre_is_orthogonal() {
        let rule = EdgeRule::new(12);
        for i in 0..5 {
            for j in 0..5 {
                let ip: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&s, w)| w * shifted_legendre(i, s) * shifted_legendre(j, s))
                    .sum();
                let expected = if i == j { 1.0 / (2 * i + 1) as f64 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-14);
            }
        }
        assert!((shifted_legendre(3, 0.2) + shifted_legendre(3, 0.8)).abs() < 1e-15);
    }
}
