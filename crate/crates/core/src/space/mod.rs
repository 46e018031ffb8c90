//! Broken polynomial space `U_h = {v : v|_K ∈ P_ℓ(K)}` on a triangle mesh.
//!
//! Every element uses the same orthonormal reference basis pushed forward
//! through its affine map, so the local mass matrix is `2|K| · I`. Degrees of
//! freedom are element-major: element `k` owns `k*m .. (k+1)*m`.

pub mod basis;
pub mod quadrature;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::ProblemData;
use crate::scalar::{dot, mat_vec, Point, Real, Tensor};

pub use basis::{local_dimension, BasisValues, ReferenceBasis};
pub use quadrature::{SegmentRule, TriangleRule};

pub const MIN_DEGREE: usize = 1;
pub const MAX_DEGREE: usize = 4;

/// Affine map `x = origin + J ξ` from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap<T> {
    pub origin: Point<T>,
    pub jac: Tensor<T>,
    pub inv: Tensor<T>,
    /// `det J = 2|K|`.
    pub det: T,
}

impl<T: Real> AffineMap<T> {
    pub fn new(v: [Point<T>; 3]) -> Self {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Self {
            origin: v[0],
            jac,
            inv,
            det,
        }
    }

    pub fn to_physical(&self, xi: Point<T>) -> Point<T> {
        let d = mat_vec(&self.jac, xi);
        [self.origin[0] + d[0], self.origin[1] + d[1]]
    }

    pub fn to_reference(&self, x: Point<T>) -> Point<T> {
        mat_vec(&self.inv, [x[0] - self.origin[0], x[1] - self.origin[1]])
    }

    /// `J^{-T} g`.
    pub fn push_gradient(&self, g: Point<T>) -> Point<T> {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// `J^{-T} H J^{-1}`.
    pub fn push_hessian(&self, h: &Tensor<T>) -> Tensor<T> {
        let m = &self.inv;
        let mut out = [[T::zero(); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (s, o) in row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for a in 0..2 {
                    for b in 0..2 {
                        acc += m[a][r] * h[a][b] * m[b][s];
                    }
                }
                *o = acc;
            }
        }
        out
    }
}

/// How many derivatives [`DGSpace::eval_basis`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Upto {
    Value,
    Gradient,
    Hessian,
}

/// Physical basis values at the volume quadrature points of one element.
#[derive(Debug, Clone)]
pub struct VolumeTabulation<T> {
    pub points: Vec<Point<T>>,
    /// Quadrature weights already scaled by `det J`.
    pub weights: Vec<T>,
    pub basis: Vec<BasisValues<T>>,
}

/// The discontinuous space on a mesh.
#[derive(Debug, Clone)]
pub struct DGSpace<'m, T> {
    pub mesh: &'m Mesh<T>,
    pub degree: usize,
    pub basis: ReferenceBasis<T>,
    /// Volume rule, exact to degree `2ℓ + 2`.
    pub volume_rule: TriangleRule<T>,
    /// Facet rule, exact to degree `2ℓ + 3`.
    pub facet_rule: SegmentRule<T>,
    pub maps: Vec<AffineMap<T>>,
    /// Reference basis at the volume rule points.
    reference_table: Vec<BasisValues<T>>,
}

impl<'m, T: Real> DGSpace<'m, T> {
    pub fn new(mesh: &'m Mesh<T>, degree: usize) -> Result<Self> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {degree} outside {MIN_DEGREE}..={MAX_DEGREE}"
            )));
        }
        let basis = ReferenceBasis::new(degree);
        let volume_rule = TriangleRule::with_degree(2 * degree + 2);
        let facet_rule = SegmentRule::with_degree(2 * degree + 3);
        let maps = (0..mesh.num_elements())
            .map(|k| AffineMap::new(mesh.vertex_coords(k)))
            .collect();
        let reference_table = volume_rule.points.iter().map(|&p| basis.eval(p)).collect();
        Ok(Self {
            mesh,
            degree,
            basis,
            volume_rule,
            facet_rule,
            maps,
            reference_table,
        })
    }

    /// Local dimension `m`.
    pub fn local_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_elements() * self.local_dim()
    }

    pub fn dof_range(&self, k: usize) -> std::ops::Range<usize> {
        let m = self.local_dim();
        k * m..(k + 1) * m
    }

    fn push_forward(&self, k: usize, mut b: BasisValues<T>, upto: Upto) -> BasisValues<T> {
        let map = &self.maps[k];
        if upto >= Upto::Gradient {
            for g in &mut b.grads {
                *g = map.push_gradient(*g);
            }
        } else {
            b.grads.clear();
        }
        if upto >= Upto::Hessian {
            for h in &mut b.hessians {
                *h = map.push_hessian(h);
            }
        } else {
            b.hessians.clear();
        }
        b
    }

    /// Physical basis values (and derivatives) of element `k` at `x`, which
    /// must lie in the closed element.
    pub fn eval_basis(&self, k: usize, x: Point<T>, upto: Upto) -> Result<BasisValues<T>> {
        let xi = self.maps[k].to_reference(x);
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if xi[0] < -tol || xi[1] < -tol || xi[0] + xi[1] > T::one() + tol {
            return Err(Error::OutsideElement {
                element: k,
                x: x[0].as_f64(),
                y: x[1].as_f64(),
            });
        }
        Ok(self.push_forward(k, self.basis.eval(xi), upto))
    }

    /// Basis evaluation without the containment check, for points known to
    /// lie on the element (facet quadrature points).
    pub(crate) fn eval_basis_on(&self, k: usize, x: Point<T>, upto: Upto) -> BasisValues<T> {
        let xi = self.maps[k].to_reference(x);
        self.push_forward(k, self.basis.eval(xi), upto)
    }

    /// Volume quadrature data of element `k` with the default rule.
    pub fn tabulate(&self, k: usize, upto: Upto) -> VolumeTabulation<T> {
        let map = &self.maps[k];
        VolumeTabulation {
            points: self.volume_rule.points.iter().map(|&p| map.to_physical(p)).collect(),
            weights: self.volume_rule.weights.iter().map(|&w| w * map.det).collect(),
            basis: self
                .reference_table
                .iter()
                .map(|b| self.push_forward(k, b.clone(), upto))
                .collect(),
        }
    }

    /// Volume quadrature data of element `k` with a custom rule.
    pub fn tabulate_with(&self, k: usize, rule: &TriangleRule<T>, upto: Upto) -> VolumeTabulation<T> {
        let map = &self.maps[k];
        VolumeTabulation {
            points: rule.points.iter().map(|&p| map.to_physical(p)).collect(),
            weights: rule.weights.iter().map(|&w| w * map.det).collect(),
            basis: rule
                .points
                .iter()
                .map(|&p| self.push_forward(k, self.basis.eval(p), upto))
                .collect(),
        }
    }

    /// Physical quadrature points and weights of facet `f` (weights include `|Λ|`).
    pub fn facet_points(&self, f: usize) -> (Vec<Point<T>>, Vec<T>) {
        let facet = &self.mesh.facets[f];
        let pts = self
            .facet_rule
            .points
            .iter()
            .map(|&s| facet.point_at(&self.mesh.vertices, s))
            .collect();
        let w = self.facet_rule.weights.iter().map(|&w| w * facet.measure).collect();
        (pts, w)
    }

    /// Elementwise `L²` projection of an element-aware field.
    ///
    /// The basis is orthonormal, so each local solve is a scaled identity.
    pub fn l2_project(&self, field: impl Fn(usize, Point<T>) -> T) -> Vec<T> {
        let m = self.local_dim();
        let mut dofs = vec![T::zero(); self.num_dofs()];
        for k in 0..self.mesh.num_elements() {
            let map = &self.maps[k];
            let block = &mut dofs[k * m..(k + 1) * m];
            for ((p, &w), b) in self
                .volume_rule
                .points
                .iter()
                .zip(&self.volume_rule.weights)
                .zip(&self.reference_table)
            {
                let fx = field(k, map.to_physical(*p));
                for (c, &phi) in block.iter_mut().zip(&b.values) {
                    *c += w * fx * phi;
                }
            }
        }
        dofs
    }

    /// Projects a problem's exact solution, using each element's region branch.
    pub fn project_exact(&self, problem: &ProblemData<T>) -> Result<Vec<T>> {
        let exact = problem
            .exact
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("problem `{}` has no exact solution", problem.name)))?;
        let regions: Vec<usize> = self.element_regions(problem);
        Ok(self.l2_project(|k, x| exact.value.branch(regions[k])(x)))
    }

    pub fn element_regions(&self, problem: &ProblemData<T>) -> Vec<usize> {
        self.mesh.centroids.iter().map(|&c| problem.region_of(c)).collect()
    }

    /// Value, gradient and Hessian of a DOF vector on element `k` at `x`.
    pub fn eval_function(&self, k: usize, dofs: &[T], x: Point<T>) -> Jet<T> {
        let b = self.eval_basis_on(k, x, Upto::Hessian);
        Jet::combine(&b, &dofs[self.dof_range(k)])
    }

    /// One-sided trace of `dofs` on facet `f` at arclength fraction `s`:
    /// the value and `A∇c · n_Λ`, with `A` taken from the side's region.
    pub fn facet_trace(
        &self,
        problem: &ProblemData<T>,
        f: usize,
        side: usize,
        dofs: &[T],
        s: T,
    ) -> Result<FacetTrace<T>> {
        let facet = &self.mesh.facets[f];
        let k = match side {
            1 => facet.k1,
            2 => facet.k2.ok_or(Error::NoSecondSide { facet: f })?,
            _ => return Err(Error::InvalidArgument(format!("side {side} is not 1 or 2"))),
        };
        let x = facet.point_at(&self.mesh.vertices, s);
        let jet = self.eval_function(k, dofs, x);
        let a = problem.a_at(x, problem.region_of(self.mesh.centroids[k]));
        Ok(FacetTrace {
            value: jet.value,
            normal_flux: dot(mat_vec(&a, jet.grad), facet.normal),
        })
    }
}

/// Value with first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub grad: Point<T>,
    pub hess: Tensor<T>,
}

impl<T: Real> Jet<T> {
    pub fn zero() -> Self {
        Self {
            value: T::zero(),
            grad: [T::zero(); 2],
            hess: [[T::zero(); 2]; 2],
        }
    }

    pub fn combine(b: &BasisValues<T>, coeffs: &[T]) -> Self {
        let mut j = Self::zero();
        for (i, &c) in coeffs.iter().enumerate() {
            j.value += c * b.values[i];
            if let Some(g) = b.grads.get(i) {
                j.grad[0] += c * g[0];
                j.grad[1] += c * g[1];
            }
            if let Some(h) = b.hessians.get(i) {
                for r in 0..2 {
                    for s in 0..2 {
                        j.hess[r][s] += c * h[r][s];
                    }
                }
            }
        }
        j
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut hess = self.hess;
        for r in 0..2 {
            for s in 0..2 {
                hess[r][s] -= other.hess[r][s];
            }
        }
        Self {
            value: self.value - other.value,
            grad: [self.grad[0] - other.grad[0], self.grad[1] - other.grad[1]],
            hess,
        }
    }
}

/// One-sided facet trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetTrace<T> {
    pub value: T,
    /// `A∇c · n_Λ`.
    pub normal_flux: T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_triangular, Rectangle};
    use crate::problem::builtin_problem;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(n: usize) -> Mesh<f64> {
        build_structured_triangular(n, Rectangle::unit()).unwrap()
    }

    fn random_point_in(space: &DGSpace<f64>, k: usize, rng: &mut ChaCha8Rng) -> Point<f64> {
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(0.0..1.0);
        let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
        space.maps[k].to_physical([a, b])
    }

    #[test]
    fn degree_range_enforced() {
        let m = mesh(1);
        assert!(DGSpace::new(&m, 0).is_err());
        assert!(DGSpace::new(&m, 5).is_err());
        assert_eq!(DGSpace::new(&m, 2).unwrap().num_dofs(), 12);
    }

    #[test]
    fn projection_reproduces_constants() {
        let m = mesh(3);
        let space = DGSpace::new(&m, 2).unwrap();
        let dofs = space.l2_project(|_, _| 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let k = rng.random_range(0..m.num_elements());
            let x = random_point_in(&space, k, &mut rng);
            let v = space.eval_function(k, &dofs, x).value;
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_reproduces_polynomials_of_the_degree() {
        let m = mesh(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for degree in 1..=4 {
            let space = DGSpace::new(&m, degree).unwrap();
            let poly = crate::problem::builtin::exactness_polynomial::<f64>(degree);
            let dofs = space.l2_project(|_, x| poly.value(x));
            for _ in 0..20 {
                let k = rng.random_range(0..m.num_elements());
                let x = random_point_in(&space, k, &mut rng);
                let j = space.eval_function(k, &dofs, x);
                assert!((j.value - poly.value(x)).abs() < 1e-12, "degree {degree}");
                let g = poly.gradient(x);
                assert!((j.grad[0] - g[0]).abs() < 1e-10 && (j.grad[1] - g[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_of_x_is_unit() {
        let m = mesh(2);
        let space = DGSpace::new(&m, 1).unwrap();
        let dofs = space.l2_project(|_, x| x[0]);
        for k in 0..m.num_elements() {
            let g = space.eval_function(k, &dofs, m.centroids[k]).grad;
            assert!((g[0] - 1.0).abs() < 1e-13 && g[1].abs() < 1e-13);
        }
    }

    #[test]
    fn mass_matrix_is_scaled_identity() {
        let m = build_structured_triangular(
            2,
            Rectangle {
                x0: 0.0,
                x1: 3.0,
                y0: -1.0,
                y1: 0.5,
            },
        )
        .unwrap();
        let space = DGSpace::new(&m, 3).unwrap();
        for k in 0..m.num_elements() {
            let tab = space.tabulate(k, Upto::Value);
            let n = space.local_dim();
            for i in 0..n {
                for j in 0..n {
                    let mij: f64 = tab
                        .weights
                        .iter()
                        .zip(&tab.basis)
                        .map(|(w, b)| w * b.values[i] * b.values[j])
                        .sum();
                    let expected = if i == j { 2.0 * m.areas[k] } else { 0.0 };
                    assert!((mij - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn outside_point_rejected() {
        let m = mesh(2);
        let space = DGSpace::new(&m, 1).unwrap();
        assert!(matches!(
            space.eval_basis(0, [0.9, 0.9], Upto::Value),
            Err(Error::OutsideElement { element: 0, .. })
        ));
        assert!(space.eval_basis(0, m.centroids[0], Upto::Gradient).is_ok());
    }

    #[test]
    fn traces_average_and_jump() {
        let m = mesh(2);
        let space = DGSpace::new(&m, 1).unwrap();
        let p = builtin_problem::<f64>("pure_diffusion").unwrap();
        // Continuous affine function: zero jump, average equals the value.
        let dofs = space.l2_project(|_, x| x[0]);
        for (f, facet) in m.facets.iter().enumerate() {
            let t1 = space.facet_trace(&p, f, 1, &dofs, 0.3).unwrap();
            let x = facet.point_at(&m.vertices, 0.3);
            assert!((t1.value - x[0]).abs() < 1e-13);
            assert!((t1.normal_flux - facet.normal[0]).abs() < 1e-12);
            match facet.k2 {
                Some(_) => {
                    let t2 = space.facet_trace(&p, f, 2, &dofs, 0.3).unwrap();
                    assert!((t1.value - t2.value).abs() < 1e-13);
                }
                None => assert!(matches!(
                    space.facet_trace(&p, f, 2, &dofs, 0.3),
                    Err(Error::NoSecondSide { .. })
                )),
            }
        }
        // Indicator of K1 on an interior facet: jump 1, average 1/2.
        let (f, facet) = m.facets.iter().enumerate().find(|(_, f)| !f.is_boundary()).unwrap();
        let dofs = space.l2_project(|k, _| if k == facet.k1 { 1.0 } else { 0.0 });
        let t1 = space.facet_trace(&p, f, 1, &dofs, 0.5).unwrap();
        let t2 = space.facet_trace(&p, f, 2, &dofs, 0.5).unwrap();
        assert!((t1.value - t2.value - 1.0).abs() < 1e-13);
        assert!((0.5 * (t1.value + t2.value) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn projection_error_converges_at_optimal_rate() {
        let pi = std::f64::consts::PI;
        let f = |x: Point<f64>| (pi * x[0]).sin() * (pi * x[1]).sin();
        for degree in 1..=2 {
            let errors: Vec<f64> = [8, 16, 32]
                .iter()
                .map(|&n| {
                    let m = mesh(n);
                    let space = DGSpace::new(&m, degree).unwrap();
                    let dofs = space.l2_project(|_, x| f(x));
                    let rule = TriangleRule::with_degree(2 * degree + 4);
                    let mut e2 = 0.0;
                    for k in 0..m.num_elements() {
                        let tab = space.tabulate_with(k, &rule, Upto::Value);
                        for ((x, w), b) in tab.points.iter().zip(&tab.weights).zip(&tab.basis) {
                            let v = Jet::combine(b, &dofs[space.dof_range(k)]).value;
                            e2 += w * (v - f(*x)).powi(2);
                        }
                    }
                    e2.sqrt()
                })
                .collect();
            let eoc = (errors[1] / errors[2]).log2();
            assert!((eoc - (degree as f64 + 1.0)).abs() < 0.15, "degree {degree} eoc {eoc}");
        }
    }
}
