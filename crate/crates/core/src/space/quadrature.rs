//! Gauss rules on the reference segment `[0, 1]` and the reference triangle
//! `{(ξ, η): ξ, η ≥ 0, ξ + η ≤ 1}`.

use crate::scalar::{Point, Real};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(m: usize) -> (Vec<T>, Vec<T>) {
    assert!(m >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![T::zero(); m];
    let mut weights = vec![T::zero(); m];
    let tol = T::epsilon() * T::lit(4.0);
    let mf = T::from_count(m);
    for i in 0..m.div_ceil(2) {
        let mut x = (T::PI() * (T::from_count(i) + T::lit(0.75)) / (mf + T::half())).cos();
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= tol {
                let (_, d) = legendre_with_derivative(m, x);
                dp = d;
                break;
            }
        }
        let w = T::two() / ((T::one() - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = T::zero();
    }
    (nodes, weights)
}

fn legendre_with_derivative<T: Real>(m: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=m {
        let kf = T::from_count(k);
        let p2 = ((T::two() * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let mf = T::from_count(m);
    let d = mf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Rule on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct SegmentRule<T> {
    pub points: Vec<T>,
    pub weights: Vec<T>,
    /// Highest polynomial degree integrated exactly.
    pub degree: usize,
}

impl<T: Real> SegmentRule<T> {
    pub fn with_degree(degree: usize) -> Self {
        let m = degree / 2 + 1;
        let (x, w) = gauss_legendre::<T>(m);
        Self {
            points: x.iter().map(|&t| T::half() * (t + T::one())).collect(),
            weights: w.iter().map(|&w| T::half() * w).collect(),
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Collapsed (Duffy) product rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct TriangleRule<T> {
    pub points: Vec<Point<T>>,
    pub weights: Vec<T>,
    pub degree: usize,
}

impl<T: Real> TriangleRule<T> {
    pub fn with_degree(degree: usize) -> Self {
        // The collapse adds one degree in the η direction.
        let m = (degree + 2).div_ceil(2);
        let (x, w) = gauss_legendre::<T>(m);
        let unit: Vec<(T, T)> = x
            .iter()
            .zip(&w)
            .map(|(&t, &w)| (T::half() * (t + T::one()), T::half() * w))
            .collect();
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for &(eta, we) in &unit {
            for &(xi, wx) in &unit {
                points.push([xi * (T::one() - eta), eta]);
                weights.push(wx * we * (T::one() - eta));
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// ∫_ref x^a y^b = a! b! / (a + b + 2)!
    fn exact_moment(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn segment_rules_integrate_monomials() {
        for degree in 0..=15 {
            let rule = SegmentRule::<f64>::with_degree(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            for p in 0..=degree {
                let q: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| w * x.powi(p as i32))
                    .sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!((q - exact).abs() <= 1e-13 * exact, "deg {degree} p {p}");
            }
        }
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        for degree in 0..=14 {
            let rule = TriangleRule::<f64>::with_degree(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-15);
            for a in 0..=degree {
                for b in 0..=(degree - a) {
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, &w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = exact_moment(a, b);
                    assert!((q - exact).abs() <= 1e-13 * exact, "deg {degree} x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn symbolic_reference_values() {
        let rule = TriangleRule::<f64>::with_degree(4);
        let ix: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0]).sum();
        let ixy: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| w * p[0] * p[1])
            .sum();
        assert!((ix - 1.0 / 6.0).abs() < 1e-15);
        assert!((ixy - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn points_lie_inside_reference_triangle() {
        let rule = TriangleRule::<f32>::with_degree(8);
        for p in &rule.points {
            assert!(p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0);
        }
    }
}
