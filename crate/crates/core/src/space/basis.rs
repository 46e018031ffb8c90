//! Modal basis of `P_ℓ` on the reference triangle, orthonormal in `L²`.

use crate::scalar::{Point, Real, Tensor};
use crate::space::quadrature::TriangleRule;

/// Exponents `(i, j)` of `(x - 1/3)^i (y - 1/3)^j`, ordered by total degree.
fn monomial_exponents(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for k in 0..=degree {
        for j in 0..=k {
            out.push((k - j, j));
        }
    }
    out
}

/// Local dimension `(ℓ + 1)(ℓ + 2) / 2`.
pub fn local_dimension(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Values and derivatives of every basis function at one point.
#[derive(Debug, Clone, Default)]
pub struct BasisValues<T> {
    pub values: Vec<T>,
    pub grads: Vec<Point<T>>,
    pub hessians: Vec<Tensor<T>>,
}

/// Orthonormal basis stored as monomial coefficients.
#[derive(Debug, Clone)]
pub struct ReferenceBasis<T> {
    pub degree: usize,
    exponents: Vec<(usize, usize)>,
    /// `coeffs[i][m]` multiplies monomial `m` in basis function `i`.
    coeffs: Vec<Vec<T>>,
}

impl<T: Real> ReferenceBasis<T> {
    /// Gram–Schmidt on the monomials with the reference `L²` inner product,
    /// applied twice for orthogonality to working precision.
    pub fn new(degree: usize) -> Self {
        let exponents = monomial_exponents(degree);
        let n = exponents.len();
        // Monomials centred at the centroid; the rule integrates their
        // products exactly.
        let rule = TriangleRule::<T>::with_degree(2 * degree);
        let third = T::one() / T::lit(3.0);
        let mut gram = vec![vec![T::zero(); n]; n];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let (x, y) = (p[0] - third, p[1] - third);
            let vals: Vec<T> = exponents
                .iter()
                .map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32))
                .collect();
            for i in 0..n {
                for j in 0..n {
                    gram[i][j] += w * vals[i] * vals[j];
                }
            }
        }
        let inner = |p: &[T], q: &[T]| -> T {
            let mut s = T::zero();
            for (i, &pi) in p.iter().enumerate() {
                if pi == T::zero() {
                    continue;
                }
                for (j, &qj) in q.iter().enumerate() {
                    s += pi * gram[i][j] * qj;
                }
            }
            s
        };
        let mut coeffs: Vec<Vec<T>> = Vec::with_capacity(n);
        for m in 0..n {
            let mut v = vec![T::zero(); n];
            v[m] = T::one();
            for _pass in 0..2 {
                for q in &coeffs {
                    let r = inner(&v, q);
                    for (vi, &qi) in v.iter_mut().zip(q) {
                        *vi -= r * qi;
                    }
                }
            }
            let norm = inner(&v, &v).sqrt();
            for vi in &mut v {
                *vi /= norm;
            }
            coeffs.push(v);
        }
        Self {
            degree,
            exponents,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluates values, gradients and Hessians at a reference point.
    pub fn eval(&self, xi: Point<T>) -> BasisValues<T> {
        let d = self.degree;
        // Powers x^0..x^d and y^0..y^d.
        let third = T::one() / T::lit(3.0);
        let (x, y) = (xi[0] - third, xi[1] - third);
        let mut px = vec![T::one(); d + 1];
        let mut py = vec![T::one(); d + 1];
        for k in 1..=d {
            px[k] = px[k - 1] * x;
            py[k] = py[k - 1] * y;
        }
        let pow = |p: &[T], e: isize| if e < 0 { T::zero() } else { p[e as usize] };
        let nm = self.exponents.len();
        let mut mv = Vec::with_capacity(nm);
        let mut mg = Vec::with_capacity(nm);
        let mut mh = Vec::with_capacity(nm);
        for &(i, j) in &self.exponents {
            let (fi, fj) = (T::from_count(i), T::from_count(j));
            let (i, j) = (i as isize, j as isize);
            mv.push(pow(&px, i) * pow(&py, j));
            mg.push([fi * pow(&px, i - 1) * pow(&py, j), fj * pow(&px, i) * pow(&py, j - 1)]);
            let hxx = fi * (fi - T::one()) * pow(&px, i - 2) * pow(&py, j);
            let hxy = fi * fj * pow(&px, i - 1) * pow(&py, j - 1);
            let hyy = fj * (fj - T::one()) * pow(&px, i) * pow(&py, j - 2);
            mh.push([[hxx, hxy], [hxy, hyy]]);
        }
        let mut out = BasisValues {
            values: Vec::with_capacity(nm),
            grads: Vec::with_capacity(nm),
            hessians: Vec::with_capacity(nm),
        };
        for c in &self.coeffs {
            let mut v = T::zero();
            let mut g = [T::zero(); 2];
            let mut h = [[T::zero(); 2]; 2];
            for (m, &cm) in c.iter().enumerate() {
                if cm == T::zero() {
                    continue;
                }
                v += cm * mv[m];
                g[0] += cm * mg[m][0];
                g[1] += cm * mg[m][1];
                for r in 0..2 {
                    for s in 0..2 {
                        h[r][s] += cm * mh[m][r][s];
                    }
                }
            }
            out.values.push(v);
            out.grads.push(g);
            out.hessians.push(h);
        }
        out
    }
}
