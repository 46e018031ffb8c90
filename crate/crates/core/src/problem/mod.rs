//! Coefficients, data and boundary specification of
//! `div(-A∇c + u c) + γ c = g`, together with the built-in benchmarks.
//!
//! Every field may be piecewise over a user partition `{D_j}` of the domain:
//! a field holds one branch per region and is evaluated with an explicit
//! region id. Element-side evaluation always passes the region of the
//! element, so one-sided traces on a region interface pick the right branch.

pub mod builtin;
mod poly;

use std::sync::Arc;

use crate::mesh::{Mesh, Rectangle};
use crate::scalar::{dot, mat_vec, sym_eigenvalues, Point, Real, Tensor};
use crate::space::quadrature::{SegmentRule, TriangleRule};

pub use builtin::{builtin_problem, Builtin};
pub use poly::Poly2;

pub type ScalarFn<T> = dyn Fn(Point<T>) -> T + Send + Sync;
pub type VectorFn<T> = dyn Fn(Point<T>) -> Point<T> + Send + Sync;
pub type TensorFn<T> = dyn Fn(Point<T>) -> Tensor<T> + Send + Sync;
/// Boundary datum evaluated at a point with the outward unit normal there.
pub type FluxFn<T> = dyn Fn(Point<T>, Point<T>) -> T + Send + Sync;
pub type RegionFn<T> = dyn Fn(Point<T>) -> usize + Send + Sync;
pub type BoundaryPredicate<T> = dyn Fn(Point<T>, Point<T>) -> bool + Send + Sync;

/// A field with one evaluator per region.
pub struct Field<F: ?Sized> {
    branches: Vec<Arc<F>>,
}

impl<F: ?Sized> Clone for Field<F> {
    fn clone(&self) -> Self {
        Self {
            branches: self.branches.clone(),
        }
    }
}

impl<F: ?Sized> Field<F> {
    pub fn from_arc(f: Arc<F>) -> Self {
        Self { branches: vec![f] }
    }

    /// Concatenates the branches of uniform fields, one per region.
    pub fn piecewise(parts: Vec<Field<F>>) -> Self {
        Self {
            branches: parts.into_iter().flat_map(|p| p.branches).collect(),
        }
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Branch for `region`; uniform fields ignore the region.
    pub fn branch(&self, region: usize) -> &F {
        &self.branches[region.min(self.branches.len() - 1)]
    }

    pub fn branch_arc(&self, region: usize) -> Arc<F> {
        self.branches[region.min(self.branches.len() - 1)].clone()
    }
}

pub type ScalarField<T> = Field<ScalarFn<T>>;
pub type VectorField<T> = Field<VectorFn<T>>;
pub type TensorField<T> = Field<TensorFn<T>>;
pub type FluxField<T> = Field<FluxFn<T>>;

impl<T: Real> Field<ScalarFn<T>> {
    pub fn new(f: impl Fn(Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn constant(c: T) -> Self {
        Self::new(move |_| c)
    }
}

impl<T: Real> Field<VectorFn<T>> {
    pub fn new(f: impl Fn(Point<T>) -> Point<T> + Send + Sync + 'static) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn constant(c: Point<T>) -> Self {
        Self::new(move |_| c)
    }
}

impl<T: Real> Field<TensorFn<T>> {
    pub fn new(f: impl Fn(Point<T>) -> Tensor<T> + Send + Sync + 'static) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn constant(c: Tensor<T>) -> Self {
        Self::new(move |_| c)
    }

    /// `s · I`.
    pub fn isotropic(s: T) -> Self {
        Self::constant([[s, T::zero()], [T::zero(), s]])
    }
}

impl<T: Real> Field<FluxFn<T>> {
    pub fn new(f: impl Fn(Point<T>, Point<T>) -> T + Send + Sync + 'static) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn zero() -> Self {
        Self::new(|_, _| T::zero())
    }
}

/// Exact solution with the derivatives needed for error norms.
#[derive(Clone)]
pub struct ExactSolution<T: Real> {
    pub value: ScalarField<T>,
    pub gradient: VectorField<T>,
    pub hessian: TensorField<T>,
}

/// Coefficients and data of one boundary value problem.
#[derive(Clone)]
pub struct ProblemData<T: Real> {
    pub name: String,
    pub domain: Rectangle<T>,
    /// Region id of a point; `None` means a single region. Points on a
    /// region boundary must resolve to the lower id.
    pub regions: Option<Arc<RegionFn<T>>>,
    /// Symmetric positive semidefinite diffusion tensor.
    pub a: TensorField<T>,
    /// Row divergence `(Σ_i ∂_i A_ij)_j`; `None` when `A` is constant per
    /// element, in which case `div(A∇c) = A : ∇²c`.
    pub div_a: Option<VectorField<T>>,
    pub u: VectorField<T>,
    pub div_u: ScalarField<T>,
    pub gamma: ScalarField<T>,
    pub g: ScalarField<T>,
    /// Dirichlet datum on `Γ_D`.
    pub kappa: ScalarField<T>,
    /// Total flux datum on `Γ_df,N,-`.
    pub chi_minus: FluxField<T>,
    /// Diffusive flux datum on `Γ_df,N,+`.
    pub chi_plus: FluxField<T>,
    /// Selects `Γ_df,D` inside `Γ_df`, evaluated at facet midpoints.
    pub dirichlet: Arc<BoundaryPredicate<T>>,
    pub exact: Option<ExactSolution<T>>,
}

impl<T: Real> ProblemData<T> {
    pub fn region_of(&self, x: Point<T>) -> usize {
        self.regions.as_ref().map_or(0, |r| r(x))
    }

    pub fn a_at(&self, x: Point<T>, r: usize) -> Tensor<T> {
        self.a.branch(r)(x)
    }

    pub fn u_at(&self, x: Point<T>, r: usize) -> Point<T> {
        self.u.branch(r)(x)
    }

    pub fn div_u_at(&self, x: Point<T>, r: usize) -> T {
        self.div_u.branch(r)(x)
    }

    pub fn gamma_at(&self, x: Point<T>, r: usize) -> T {
        self.gamma.branch(r)(x)
    }

    /// `γ0 = γ + div(u) / 2` inside region `r`.
    pub fn gamma0_at(&self, x: Point<T>, r: usize) -> T {
        self.gamma_at(x, r) + T::half() * self.div_u_at(x, r)
    }

    /// `γ0` at a point, resolving its region.
    pub fn gamma0(&self, x: Point<T>) -> T {
        self.gamma0_at(x, self.region_of(x))
    }

    pub fn g_at(&self, x: Point<T>, r: usize) -> T {
        self.g.branch(r)(x)
    }

    pub fn kappa_at(&self, x: Point<T>, r: usize) -> T {
        self.kappa.branch(r)(x)
    }

    pub fn div_a_at(&self, x: Point<T>, r: usize) -> Point<T> {
        self.div_a
            .as_ref()
            .map_or([T::zero(); 2], |f| f.branch(r)(x))
    }

    pub fn is_dirichlet(&self, x: Point<T>, n: Point<T>) -> bool {
        (self.dirichlet)(x, n)
    }
}

/// Builds a problem whose data are derived from a prescribed solution:
/// `g`, `κ` and `χ±` all follow by substitution, branch by branch.
#[allow(clippy::too_many_arguments)]
pub fn manufactured<T: Real>(
    name: &str,
    domain: Rectangle<T>,
    regions: Option<Arc<RegionFn<T>>>,
    a: TensorField<T>,
    u: VectorField<T>,
    div_u: ScalarField<T>,
    gamma: ScalarField<T>,
    exact: ExactSolution<T>,
    dirichlet: Arc<BoundaryPredicate<T>>,
) -> ProblemData<T> {
    let count = [
        a.num_branches(),
        u.num_branches(),
        div_u.num_branches(),
        gamma.num_branches(),
        exact.value.num_branches(),
        exact.gradient.num_branches(),
        exact.hessian.num_branches(),
    ]
    .into_iter()
    .max()
    .unwrap_or(1);

    let mut g = Vec::with_capacity(count);
    let mut chi_minus = Vec::with_capacity(count);
    let mut chi_plus = Vec::with_capacity(count);
    for r in 0..count {
        let (af, uf, du, gm) = (a.branch_arc(r), u.branch_arc(r), div_u.branch_arc(r), gamma.branch_arc(r));
        let (cv, cg, ch) = (
            exact.value.branch_arc(r),
            exact.gradient.branch_arc(r),
            exact.hessian.branch_arc(r),
        );
        g.push(ScalarField::new(move |x| {
            let am = af(x);
            let h = ch(x);
            let grad = cg(x);
            let div_flux = am[0][0] * h[0][0] + am[0][1] * h[0][1] + am[1][0] * h[1][0] + am[1][1] * h[1][1];
            -div_flux + dot(uf(x), grad) + (du(x) + gm(x)) * cv(x)
        }));
        let (af, uf, cv, cg) = (a.branch_arc(r), u.branch_arc(r), exact.value.branch_arc(r), exact.gradient.branch_arc(r));
        chi_minus.push(FluxField::new(move |x, n| {
            let flux = mat_vec(&af(x), cg(x));
            let uu = uf(x);
            dot([uu[0] * cv(x) - flux[0], uu[1] * cv(x) - flux[1]], n)
        }));
        let (af, cg) = (a.branch_arc(r), exact.gradient.branch_arc(r));
        chi_plus.push(FluxField::new(move |x, n| -dot(mat_vec(&af(x), cg(x)), n)));
    }

    ProblemData {
        name: name.to_string(),
        domain,
        regions,
        a,
        div_a: None,
        u,
        div_u,
        gamma,
        g: Field::piecewise(g),
        kappa: exact.value.clone(),
        chi_minus: Field::piecewise(chi_minus),
        chi_plus: Field::piecewise(chi_plus),
        dirichlet,
        exact: Some(exact),
    }
}

/// Which assumption a sample violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `A` is not symmetric.
    Asymmetric,
    /// `A` has a negative eigenvalue.
    NotPositiveSemidefinite,
    /// `γ0 < 0`.
    NegativeGamma0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    pub kind: ViolationKind,
    pub element: usize,
    pub point: Point<T>,
    pub value: T,
}

/// Outcome of [`validate_problem`]; `violations` keeps the first ten.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub samples: usize,
    pub total_violations: usize,
    pub violations: Vec<Violation<T>>,
}

impl<T> ValidationReport<T> {
    pub fn is_valid(&self) -> bool {
        self.total_violations == 0
    }
}

/// Samples `A` and `γ0` at volume and facet quadrature points of every
/// element (plus its vertices) and lists assumption violations.
pub fn validate_problem<T: Real>(problem: &ProblemData<T>, mesh: &Mesh<T>) -> ValidationReport<T> {
    const KEEP: usize = 10;
    let tol = T::lit(1e-12);
    let tri = TriangleRule::<T>::with_degree(6);
    let seg = SegmentRule::<T>::with_degree(7);
    let mut report = ValidationReport {
        samples: 0,
        total_violations: 0,
        violations: Vec::new(),
    };
    let record = |report: &mut ValidationReport<T>, kind, element, point, value| {
        report.total_violations += 1;
        if report.violations.len() < KEEP {
            report.violations.push(Violation {
                kind,
                element,
                point,
                value,
            });
        }
    };
    for k in 0..mesh.num_elements() {
        let r = problem.region_of(mesh.centroids[k]);
        let [p0, p1, p2] = mesh.vertex_coords(k);
        let mut points: Vec<Point<T>> = tri
            .points
            .iter()
            .map(|xi| {
                [
                    p0[0] + xi[0] * (p1[0] - p0[0]) + xi[1] * (p2[0] - p0[0]),
                    p0[1] + xi[0] * (p1[1] - p0[1]) + xi[1] * (p2[1] - p0[1]),
                ]
            })
            .collect();
        for &f in &mesh.element_facets[k] {
            let facet = &mesh.facets[f];
            points.extend(seg.points.iter().map(|&s| facet.point_at(&mesh.vertices, s)));
        }
        points.extend([p0, p1, p2]);
        for x in points {
            report.samples += 1;
            let a = problem.a_at(x, r);
            let scale = T::one().max(a[0][0].abs()).max(a[1][1].abs());
            let asym = (a[0][1] - a[1][0]).abs();
            if asym > tol * scale {
                record(&mut report, ViolationKind::Asymmetric, k, x, asym);
            }
            let (lo, _) = sym_eigenvalues(&a);
            if lo < -tol {
                record(&mut report, ViolationKind::NotPositiveSemidefinite, k, x, lo);
            }
            let g0 = problem.gamma0_at(x, r);
            if g0 < -tol {
                record(&mut report, ViolationKind::NegativeGamma0, k, x, g0);
            }
        }
    }
    report
}
