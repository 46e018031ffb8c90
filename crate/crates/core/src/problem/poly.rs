use crate::scalar::{Point, Real, Tensor};

/// Bivariate polynomial `Σ c_ij x^i y^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2<T> {
    pub terms: Vec<((usize, usize), T)>,
}

fn pw<T: Real>(x: T, e: usize) -> T {
    x.powi(e as i32)
}

impl<T: Real> Poly2<T> {
    pub fn new(terms: Vec<((usize, usize), T)>) -> Self {
        Self { terms }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|((i, j), _)| i + j).max().unwrap_or(0)
    }

    pub fn value(&self, p: Point<T>) -> T {
        self.terms
            .iter()
            .map(|&((i, j), c)| c * pw(p[0], i) * pw(p[1], j))
            .sum()
    }

    pub fn gradient(&self, p: Point<T>) -> Point<T> {
        let mut g = [T::zero(); 2];
        for &((i, j), c) in &self.terms {
            if i > 0 {
                g[0] += c * T::from_count(i) * pw(p[0], i - 1) * pw(p[1], j);
            }
            if j > 0 {
                g[1] += c * T::from_count(j) * pw(p[0], i) * pw(p[1], j - 1);
            }
        }
        g
    }

    pub fn hessian(&self, p: Point<T>) -> Tensor<T> {
        let mut h = [[T::zero(); 2]; 2];
        for &((i, j), c) in &self.terms {
            let (fi, fj) = (T::from_count(i), T::from_count(j));
            if i > 1 {
                h[0][0] += c * fi * (fi - T::one()) * pw(p[0], i - 2) * pw(p[1], j);
            }
            if i > 0 && j > 0 {
                let v = c * fi * fj * pw(p[0], i - 1) * pw(p[1], j - 1);
                h[0][1] += v;
                h[1][0] += v;
            }
            if j > 1 {
                h[1][1] += c * fj * (fj - T::one()) * pw(p[0], i) * pw(p[1], j - 2);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_cubic() {
        // 1 + x + 2y + x²y - y³
        let p: Poly2<f64> = Poly2::new(vec![((0, 0), 1.0), ((1, 0), 1.0), ((0, 1), 2.0), ((2, 1), 1.0), ((0, 3), -1.0)]);
        let x = [0.5, -2.0];
        assert_eq!(p.degree(), 3);
        assert!((p.value(x) - (1.0 + 0.5 - 4.0 - 0.5 + 8.0)).abs() < 1e-14);
        let g = p.gradient(x);
        assert!((g[0] - (1.0 + 2.0 * 0.5 * -2.0)).abs() < 1e-14);
        assert!((g[1] - (2.0 + 0.25 - 3.0 * 4.0)).abs() < 1e-14);
        let h = p.hessian(x);
        assert!((h[0][0] - 2.0 * -2.0).abs() < 1e-14);
        assert!((h[0][1] - 1.0).abs() < 1e-14);
        assert!((h[1][1] - 12.0).abs() < 1e-14);
    }
}
