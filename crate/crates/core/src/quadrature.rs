//! Quadrature rules used by assembly and by the error norms.
//!
//! Triangle rules store barycentric points with weights summing to the
//! reference measure 1/2, so ∫_K f ≈ 2|K| Σ w_q f(x_q). Edge rules live on
//! [0,1] with weights summing to 1, so ∫_e f ≈ |e| Σ w_q f(x(t_q)).

/// Symmetric rule on the reference triangle, exact through a stated degree.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Barycentric coordinates (λ0, λ1, λ2) of each point.
    pub points: Vec<[f64; 3]>,
    /// Weights; Σ w_q = 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Six-point rule exact for polynomials of total degree ≤ 4.
    pub fn degree4() -> Self {
        // Two symmetric orbits; the familiar constants for the 6-point rule,
        // halved so the weights sum to the reference-triangle measure.
        let a1 = 0.445_948_490_915_965;
        let w1 = 0.223_381_589_678_011 / 2.0;
        let a2 = 0.091_576_213_509_771;
        let w2 = 0.109_951_743_655_322 / 2.0;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.push([b, a, a]);
            points.push([a, b, a]);
            points.push([a, a, b]);
            weights.extend_from_slice(&[w, w, w]);
        }
        Self {
            points,
            weights,
            degree: 4,
        }
    }

    /// One-point barycenter rule (degree 1); handy in tests.
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.5],
            degree: 1,
        }
    }

    /// ∫_K f dx for the triangle with the given corner coordinates.
    pub fn integrate(&self, coords: &[[f64; 2]; 3], f: impl Fn(f64, f64) -> f64) -> f64 {
        let det = (coords[1][0] - coords[0][0]) * (coords[2][1] - coords[0][1])
            - (coords[2][0] - coords[0][0]) * (coords[1][1] - coords[0][1]);
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let x = p[0] * coords[0][0] + p[1] * coords[1][0] + p[2] * coords[2][0];
            let y = p[0] * coords[0][1] + p[1] * coords[1][1] + p[2] * coords[2][1];
            acc += w * f(x, y);
        }
        acc * det.abs()
    }
}

/// Gauss–Legendre rule on the unit interval.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    /// Points t_q in (0,1).
    pub points: Vec<f64>,
    /// Weights; Σ w_q = 1.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    /// Three-point Gauss–Legendre, exact through degree 5.
    pub fn gauss3() -> Self {
        let s = (0.6f64).sqrt() / 2.0; // sqrt(3/5)/2
        Self {
            points: vec![0.5 - s, 0.5, 0.5 + s],
            weights: vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            degree: 5,
        }
    }

    /// ∫ over the segment a→b of a field given in x,y coordinates.
    pub fn integrate(&self, a: [f64; 2], b: [f64; 2], f: impl Fn(f64, f64) -> f64) -> f64 {
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let mut acc = 0.0;
        for (t, w) in self.points.iter().zip(&self.weights) {
            let x = a[0] + t * (b[0] - a[0]);
            let y = a[1] + t * (b[1] - a[1]);
            acc += w * f(x, y);
        }
        acc * len
    }
}

/// The rule pair used throughout assembly.
#[derive(Debug, Clone)]
pub struct QuadratureRules {
    pub triangle: TriangleRule,
    pub edge: EdgeRule,
}

impl Default for QuadratureRules {
    fn default() -> Self {
        Self {
            triangle: TriangleRule::degree4(),
            edge: EdgeRule::gauss3(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn triangle_weights_sum_to_reference_measure() {
        let rule = TriangleRule::degree4();
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 0.5).abs() < 1e-15);
        for p in &rule.points {
            assert!((p[0] + p[1] + p[2] - 1.0).abs() < 1e-15);
            assert!(p.iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn triangle_rule_exact_through_degree4() {
        let rule = TriangleRule::degree4();
        // ∫ x^p y^q over the unit triangle = p! q! / (p+q+2)!
        let exact = |p: u32, q: u32| {
            let fact = |n: u32| (1..=n).map(f64::from).product::<f64>().max(1.0);
            fact(p) * fact(q) / fact(p + q + 2)
        };
        for p in 0..=4u32 {
            for q in 0..=(4 - p) {
                let got = rule.integrate(&UNIT, |x, y| x.powi(p as i32) * y.powi(q as i32));
                assert!(
                    (got - exact(p, q)).abs() < 1e-15,
                    "x^{p} y^{q}: got {got}, want {}",
                    exact(p, q)
                );
            }
        }
    }

    #[test]
    fn triangle_rule_scales_with_area() {
        let rule = TriangleRule::degree4();
        let tri = [[1.0, 1.0], [3.0, 1.0], [1.0, 4.0]];
        assert!((rule.integrate(&tri, |_, _| 1.0) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn edge_rule_exact_through_degree5() {
        let rule = EdgeRule::gauss3();
        for p in 0..=5u32 {
            let got = rule.integrate([0.0, 0.0], [0.0, 1.0], |_, y| y.powi(p as i32));
            let want = 1.0 / f64::from(p + 1);
            assert!((got - want).abs() < 1e-15, "y^{p}: got {got}, want {want}");
        }
        // length scaling on a slanted segment
        let len = 5.0;
        let got = rule.integrate([0.0, 0.0], [3.0, 4.0], |_, _| 2.0);
        assert!((got - 2.0 * len).abs() < 1e-14);
    }
}
