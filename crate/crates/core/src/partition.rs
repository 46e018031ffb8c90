//! Facet classification by diffusion and flow regime.
//!
//! Every facet gets exactly one label:
//!
//! * boundary facets are diffusive (`n^T A n > 0`) or advective, diffusive
//!   ones split into Dirichlet/Neumann by the problem's predicate, and all
//!   split into inflow/outflow by the sign of `u·n`;
//! * interior facets are df-df (diffusive on both sides), ad-df (one side)
//!   or ad-ad; df-df facets are further split into diffusion-dominated
//!   (`|Λ|^{1/(d-1)} |u·n| < A_Λ` everywhere) and advection-dominated.
//!
//! "Almost everywhere on Λ" is realised as "at every sample point": Gauss
//! points of a fixed facet rule plus both endpoints. A facet whose samples
//! disagree is reported as ambiguous instead of being guessed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::problem::ProblemData;
use crate::scalar::{dot, quad_form, sym_eigenvalues, Point, Real};
use crate::space::quadrature::{SegmentRule, TriangleRule};

/// Class of a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryClass {
    /// Diffusive Dirichlet; `inflow` marks `Γ_df,D,-`.
    DfD { inflow: bool },
    DfNMinus,
    DfNPlus,
    AdMinus,
    AdPlus,
}

/// Class of an interior facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteriorClass {
    DfDfDfd,
    DfDfAdd,
    AdDfPlus,
    AdDfMinus,
    AdAd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacetClass {
    Boundary(BoundaryClass),
    Interior(InteriorClass),
}

impl FacetClass {
    pub fn label(&self) -> &'static str {
        match self {
            FacetClass::Boundary(BoundaryClass::DfD { inflow: true }) => "DfD_inflow",
            FacetClass::Boundary(BoundaryClass::DfD { inflow: false }) => "DfD",
            FacetClass::Boundary(BoundaryClass::DfNMinus) => "DfN_minus",
            FacetClass::Boundary(BoundaryClass::DfNPlus) => "DfN_plus",
            FacetClass::Boundary(BoundaryClass::AdMinus) => "Ad_minus",
            FacetClass::Boundary(BoundaryClass::AdPlus) => "Ad_plus",
            FacetClass::Interior(InteriorClass::DfDfDfd) => "DfDf_dfd",
            FacetClass::Interior(InteriorClass::DfDfAdd) => "DfDf_add",
            FacetClass::Interior(InteriorClass::AdDfPlus) => "AdDf_plus",
            FacetClass::Interior(InteriorClass::AdDfMinus) => "AdDf_minus",
            FacetClass::Interior(InteriorClass::AdAd) => "AdAd",
        }
    }

    /// Member of `F^{df-df,0}`.
    pub fn is_df_df(&self) -> bool {
        matches!(
            self,
            FacetClass::Interior(InteriorClass::DfDfDfd | InteriorClass::DfDfAdd)
        )
    }

    /// Member of `F_{df,D,h}`.
    pub fn is_df_dirichlet(&self) -> bool {
        matches!(self, FacetClass::Boundary(BoundaryClass::DfD { .. }))
    }

    /// Carries averages and jumps of the diffusive flux (`df-df ∪ df,D`).
    pub fn is_diffusive_coupling(&self) -> bool {
        self.is_df_df() || self.is_df_dirichlet()
    }
}

/// Diffusion- or advection-dominated split of df-df and df,D facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dominance {
    Dfd,
    Add,
}

impl Dominance {
    pub fn label(&self) -> &'static str {
        match self {
            Dominance::Dfd => "dfd",
            Dominance::Add => "add",
        }
    }
}

/// Per-facet diffusion and flow samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetScalars<T> {
    /// One-sided maxima of `n^T A n`; the second entry is zero on the boundary.
    pub a_max: [T; 2],
    /// `A_Λ`, defined on df-df and df,D facets only.
    pub a_lambda: Option<T>,
    /// `u · n_Λ` at the sample points.
    pub un_samples: Vec<T>,
    pub max_abs_un: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacetInfo<T> {
    pub class: FacetClass,
    pub scalars: FacetScalars<T>,
    /// Set on df-df and df,D facets.
    pub dominance: Option<Dominance>,
}

/// Thresholds for the sign tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    /// `n^T A n > tol_a` counts as diffusive.
    pub tol_a: f64,
    /// `u·n < -tol_u` counts as inflow.
    pub tol_u: f64,
    /// Exactness of the facet sample rule.
    pub sample_degree: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tol_a: 1e-12,
            tol_u: 1e-12,
            sample_degree: 11,
        }
    }
}

/// Classification result; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    pub facets: Vec<FacetInfo<T>>,
    /// `A_max,K`.
    pub a_max_element: Vec<T>,
    /// `ε_df,K`.
    pub eps_df: Vec<T>,
}

/// Label counts of a partition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub dfdf_dfd: usize,
    pub dfdf_add: usize,
    pub addf_plus: usize,
    pub addf_minus: usize,
    pub adad: usize,
    pub dfd: usize,
    pub dfd_inflow: usize,
    pub dfd_dfd: usize,
    pub dfn_minus: usize,
    pub dfn_plus: usize,
    pub ad_minus: usize,
    pub ad_plus: usize,
}

impl ClassCounts {
    pub fn interior(&self) -> usize {
        self.dfdf_dfd + self.dfdf_add + self.addf_plus + self.addf_minus + self.adad
    }

    pub fn boundary(&self) -> usize {
        self.dfd + self.dfn_minus + self.dfn_plus + self.ad_minus + self.ad_plus
    }
}

impl<T: Real> Partition<T> {
    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for info in &self.facets {
            match info.class {
                FacetClass::Interior(InteriorClass::DfDfDfd) => c.dfdf_dfd += 1,
                FacetClass::Interior(InteriorClass::DfDfAdd) => c.dfdf_add += 1,
                FacetClass::Interior(InteriorClass::AdDfPlus) => c.addf_plus += 1,
                FacetClass::Interior(InteriorClass::AdDfMinus) => c.addf_minus += 1,
                FacetClass::Interior(InteriorClass::AdAd) => c.adad += 1,
                FacetClass::Boundary(BoundaryClass::DfD { inflow }) => {
                    c.dfd += 1;
                    c.dfd_inflow += usize::from(inflow);
                    c.dfd_dfd += usize::from(info.dominance == Some(Dominance::Dfd));
                }
                FacetClass::Boundary(BoundaryClass::DfNMinus) => c.dfn_minus += 1,
                FacetClass::Boundary(BoundaryClass::DfNPlus) => c.dfn_plus += 1,
                FacetClass::Boundary(BoundaryClass::AdMinus) => c.ad_minus += 1,
                FacetClass::Boundary(BoundaryClass::AdPlus) => c.ad_plus += 1,
            }
        }
        c
    }

    pub fn class(&self, f: usize) -> FacetClass {
        self.facets[f].class
    }

    /// `A_Λ` of facet `f`; a logic error outside df-df and df,D facets.
    pub fn a_lambda(&self, f: usize) -> Result<T> {
        self.facets[f].scalars.a_lambda.ok_or_else(|| {
            Error::Logic(format!(
                "A_Λ requested on facet {f} of class {}",
                self.facets[f].class.label()
            ))
        })
    }
}

/// Whether one side of a facet is diffusive, judged over all samples.
fn side_regime<T: Real>(samples: &[T], tol: T, facet: usize) -> Result<bool> {
    let positive = samples.iter().filter(|&&s| s > tol).count();
    if positive == samples.len() {
        Ok(true)
    } else if positive == 0 {
        Ok(false)
    } else {
        Err(Error::ClassificationAmbiguity {
            facet,
            reason: format!(
                "n^T A n is positive at {positive} of {} samples",
                samples.len()
            ),
        })
    }
}

fn is_inflow<T: Real>(un: &[T], tol: T) -> bool {
    un.iter().all(|&v| v < -tol)
}

/// `|Λ|^{1/(d-1)} |u·n| < A_Λ` at every sample.
pub fn dominance_split<T: Real>(measure: T, dim: usize, a_lambda: T, un_samples: &[T]) -> Dominance {
    let scale = measure.powf(T::one() / T::from_count(dim - 1));
    if un_samples.iter().all(|&un| scale * un.abs() < a_lambda) {
        Dominance::Dfd
    } else {
        Dominance::Add
    }
}

/// `A_Λ`: mean of the one-sided maxima on df-df facets, the single-side
/// maximum on df,D facets.
pub fn compute_a_lambda<T: Real>(class: FacetClass, a_max: [T; 2]) -> Result<T> {
    if class.is_df_df() {
        Ok(T::half() * (a_max[0] + a_max[1]))
    } else if class.is_df_dirichlet() {
        Ok(a_max[0])
    } else {
        Err(Error::Logic(format!("A_Λ is undefined on {} facets", class.label())))
    }
}

struct Sampler<T> {
    rule: SegmentRule<T>,
    tol_a: T,
    tol_u: T,
}

impl<T: Real> Sampler<T> {
    fn points(&self, mesh: &Mesh<T>, f: usize) -> Vec<Point<T>> {
        let facet = &mesh.facets[f];
        let mut pts: Vec<Point<T>> = self
            .rule
            .points
            .iter()
            .map(|&s| facet.point_at(&mesh.vertices, s))
            .collect();
        pts.push(mesh.vertices[facet.vertices[0]]);
        pts.push(mesh.vertices[facet.vertices[1]]);
        pts
    }
}

struct RawFacet<T> {
    diffusive: [bool; 2],
    a_max: [T; 2],
    un: Vec<T>,
}

fn sample_facet<T: Real>(
    mesh: &Mesh<T>,
    problem: &ProblemData<T>,
    sampler: &Sampler<T>,
    regions: &[usize],
    f: usize,
) -> Result<RawFacet<T>> {
    let facet = &mesh.facets[f];
    let n = facet.normal;
    let pts = sampler.points(mesh, f);
    let one_side = |k: usize| -> Result<(bool, T)> {
        let r = regions[k];
        let nan: Vec<T> = pts.iter().map(|&x| quad_form(&problem.a_at(x, r), n)).collect();
        let diffusive = side_regime(&nan, sampler.tol_a, f)?;
        Ok((diffusive, nan.iter().copied().fold(T::zero(), T::max)))
    };
    let (d1, m1) = one_side(facet.k1)?;
    let (d2, m2) = match facet.k2 {
        Some(k2) => one_side(k2)?,
        None => (false, T::zero()),
    };
    let un = pts
        .iter()
        .map(|&x| {
            let u1 = problem.u_at(x, regions[facet.k1]);
            match facet.k2 {
                Some(k2) => {
                    let u2 = problem.u_at(x, regions[k2]);
                    T::half() * (dot(u1, n) + dot(u2, n))
                }
                None => dot(u1, n),
            }
        })
        .collect();
    Ok(RawFacet {
        diffusive: [d1, d2],
        a_max: [m1, m2],
        un,
    })
}

fn boundary_class<T: Real>(
    mesh: &Mesh<T>,
    problem: &ProblemData<T>,
    tol_u: T,
    f: usize,
    raw: &RawFacet<T>,
) -> BoundaryClass {
    let facet = &mesh.facets[f];
    let inflow = is_inflow(&raw.un, tol_u);
    if raw.diffusive[0] {
        if problem.is_dirichlet(facet.midpoint, facet.normal) {
            BoundaryClass::DfD { inflow }
        } else if inflow {
            BoundaryClass::DfNMinus
        } else {
            BoundaryClass::DfNPlus
        }
    } else if inflow {
        BoundaryClass::AdMinus
    } else {
        BoundaryClass::AdPlus
    }
}

/// Interior class before the dominance split; df-df facets come back as
/// `DfDfDfd` and are refined by [`dominance_split`].
fn interior_class<T: Real>(tol_u: T, raw: &RawFacet<T>) -> InteriorClass {
    match raw.diffusive {
        [true, true] => InteriorClass::DfDfDfd,
        [false, false] => InteriorClass::AdAd,
        [df1, _] => {
            // Orient n from the diffusive side towards the advective side.
            let un: Vec<T> = if df1 {
                raw.un.clone()
            } else {
                raw.un.iter().map(|&v| -v).collect()
            };
            if is_inflow(&un, tol_u) {
                InteriorClass::AdDfMinus
            } else {
                InteriorClass::AdDfPlus
            }
        }
    }
}

fn sampler<T: Real>(cfg: &ClassifyConfig) -> Sampler<T> {
    Sampler {
        rule: SegmentRule::with_degree(cfg.sample_degree),
        tol_a: T::lit(cfg.tol_a),
        tol_u: T::lit(cfg.tol_u),
    }
}

fn regions_of<T: Real>(mesh: &Mesh<T>, problem: &ProblemData<T>) -> Vec<usize> {
    mesh.centroids.iter().map(|&c| problem.region_of(c)).collect()
}

/// Labels every boundary facet, as `(facet id, class)` pairs in facet order.
pub fn classify_boundary<T: Real>(
    mesh: &Mesh<T>,
    problem: &ProblemData<T>,
    cfg: &ClassifyConfig,
) -> Result<Vec<(usize, BoundaryClass)>> {
    let s = sampler(cfg);
    let regions = regions_of(mesh, problem);
    mesh.facets
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_boundary())
        .map(|(f, _)| {
            let raw = sample_facet(mesh, problem, &s, &regions, f)?;
            Ok((f, boundary_class(mesh, problem, s.tol_u, f, &raw)))
        })
        .collect()
}

/// Labels every interior facet, including the dominance split of df-df facets.
pub fn classify_interior<T: Real>(
    mesh: &Mesh<T>,
    problem: &ProblemData<T>,
    cfg: &ClassifyConfig,
) -> Result<Vec<(usize, InteriorClass)>> {
    let partition = classify_with(mesh, problem, cfg)?;
    Ok(partition
        .facets
        .iter()
        .enumerate()
        .filter_map(|(f, info)| match info.class {
            FacetClass::Interior(c) => Some((f, c)),
            FacetClass::Boundary(_) => None,
        })
        .collect())
}

/// `A_max,K`: largest eigenvalue of `A` over quadrature points and vertices.
fn element_a_max<T: Real>(mesh: &Mesh<T>, problem: &ProblemData<T>, rule: &TriangleRule<T>, k: usize, r: usize) -> T {
    let [p0, p1, p2] = mesh.vertex_coords(k);
    rule.points
        .iter()
        .map(|xi| {
            [
                p0[0] + xi[0] * (p1[0] - p0[0]) + xi[1] * (p2[0] - p0[0]),
                p0[1] + xi[0] * (p1[1] - p0[1]) + xi[1] * (p2[1] - p0[1]),
            ]
        })
        .chain([p0, p1, p2])
        .map(|x| sym_eigenvalues(&problem.a_at(x, r)).1)
        .fold(T::zero(), T::max)
}

/// `ε_df,K = max(A_max,K, A_Λ for Λ ⊂ ∂K in df-df ∪ df,D)`.
pub fn epsilon_df<T: Real>(mesh: &Mesh<T>, facets: &[FacetInfo<T>], a_max_element: &[T], k: usize) -> T {
    mesh.element_facets[k]
        .iter()
        .filter_map(|&f| facets[f].scalars.a_lambda)
        .fold(a_max_element[k], T::max)
}

/// Full classification with default thresholds.
pub fn classify<T: Real>(mesh: &Mesh<T>, problem: &ProblemData<T>) -> Result<Partition<T>> {
    classify_with(mesh, problem, &ClassifyConfig::default())
}

/// Full classification: labels, `A_Λ`, dominance, `A_max,K` and `ε_df,K`.
pub fn classify_with<T: Real>(
    mesh: &Mesh<T>,
    problem: &ProblemData<T>,
    cfg: &ClassifyConfig,
) -> Result<Partition<T>> {
    let s = sampler(cfg);
    let regions = regions_of(mesh, problem);
    let facets: Vec<FacetInfo<T>> = (0..mesh.num_facets())
        .into_par_iter()
        .map(|f| -> Result<FacetInfo<T>> {
            let raw = sample_facet(mesh, problem, &s, &regions, f)?;
            let geom = &mesh.facets[f];
            let mut class = if geom.is_boundary() {
                FacetClass::Boundary(boundary_class(mesh, problem, s.tol_u, f, &raw))
            } else {
                FacetClass::Interior(interior_class(s.tol_u, &raw))
            };
            let a_lambda = compute_a_lambda(class, raw.a_max).ok();
            let dominance = a_lambda.map(|al| dominance_split(geom.measure, mesh.dim, al, &raw.un));
            if class.is_df_df() && dominance == Some(Dominance::Add) {
                class = FacetClass::Interior(InteriorClass::DfDfAdd);
            }
            let max_abs_un = raw.un.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            Ok(FacetInfo {
                class,
                scalars: FacetScalars {
                    a_max: raw.a_max,
                    a_lambda,
                    un_samples: raw.un,
                    max_abs_un,
                },
                dominance,
            })
        })
        .collect::<Result<_>>()?;

    let rule = TriangleRule::<T>::with_degree(cfg.sample_degree);
    let a_max_element: Vec<T> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| element_a_max(mesh, problem, &rule, k, regions[k]))
        .collect();
    let eps_df = (0..mesh.num_elements())
        .map(|k| epsilon_df(mesh, &facets, &a_max_element, k))
        .collect();
    Ok(Partition {
        facets,
        a_max_element,
        eps_df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_triangular, Rectangle};
    use crate::problem::{
        builtin_problem, manufactured, ExactSolution, ScalarField, TensorField, VectorField,
    };
    use std::sync::Arc;

    fn problem(a: TensorField<f64>, u: [f64; 2], dirichlet: bool) -> ProblemData<f64> {
        let exact = ExactSolution {
            value: ScalarField::constant(0.0),
            gradient: VectorField::constant([0.0, 0.0]),
            hessian: TensorField::constant([[0.0; 2]; 2]),
        };
        manufactured(
            "t",
            Rectangle::unit(),
            None,
            a,
            VectorField::constant(u),
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
            exact,
            Arc::new(move |_, _| dirichlet),
        )
    }

    fn facet_where(mesh: &Mesh<f64>, pred: impl Fn(Point<f64>, Point<f64>) -> bool) -> usize {
        mesh.facets
            .iter()
            .position(|f| f.is_boundary() && pred(f.midpoint, f.normal))
            .unwrap()
    }

    #[test]
    fn left_wall_with_diffusion_is_dirichlet_inflow() {
        let mesh = build_structured_triangular(2, Rectangle::unit()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let left = facet_where(&mesh, |x, _| x[0] == 0.0);
        for (dirichlet, expected) in [
            (true, BoundaryClass::DfD { inflow: true }),
            (false, BoundaryClass::DfNMinus),
        ] {
            let p = problem(TensorField::isotropic(1.0), [s, s], dirichlet);
            let part = classify(&mesh, &p).unwrap();
            assert_eq!(part.class(left), FacetClass::Boundary(expected));
            let un = &part.facets[left].scalars.un_samples;
            assert!(un.iter().all(|&v| (v + s).abs() < 1e-15));
        }
    }

    #[test]
    fn hyperbolic_walls() {
        let mesh = build_structured_triangular(2, Rectangle::unit()).unwrap();
        let p = problem(TensorField::isotropic(0.0), [0.0, 1.0], true);
        let part = classify(&mesh, &p).unwrap();
        let bottom = facet_where(&mesh, |x, _| x[1] == 0.0);
        let top = facet_where(&mesh, |x, _| x[1] == 1.0);
        assert_eq!(part.class(bottom), FacetClass::Boundary(BoundaryClass::AdMinus));
        assert_eq!(part.class(top), FacetClass::Boundary(BoundaryClass::AdPlus));
        let c = part.counts();
        assert_eq!(c.dfdf_dfd + c.dfdf_add + c.addf_plus + c.addf_minus, 0);
        assert_eq!(c.adad, mesh.num_interior_facets());
        assert_eq!(c.ad_minus + c.ad_plus, mesh.num_boundary_facets());
        assert!(part.eps_df.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn positive_definite_has_no_advective_facets() {
        let mesh = build_structured_triangular(4, Rectangle::unit()).unwrap();
        let p = problem(TensorField::isotropic(1.0), [1.0, 0.5], true);
        let c = classify(&mesh, &p).unwrap().counts();
        assert_eq!(c.addf_plus + c.addf_minus + c.adad + c.ad_minus + c.ad_plus, 0);
        assert_eq!(c.interior(), mesh.num_interior_facets());
        assert_eq!(c.boundary(), mesh.num_boundary_facets());
    }

    #[test]
    fn interface_facets_are_addf_plus() {
        let mesh = build_structured_triangular(8, Rectangle::unit()).unwrap();
        let p = builtin_problem::<f64>("degenerate_interface").unwrap();
        let part = classify(&mesh, &p).unwrap();
        let c = part.counts();
        assert_eq!(c.addf_plus, 8);
        assert_eq!(c.addf_minus, 0);
        for (f, geom) in mesh.facets.iter().enumerate() {
            if (geom.midpoint[0] - 0.5).abs() < 1e-12 && !geom.is_boundary() {
                assert_eq!(part.class(f), FacetClass::Interior(InteriorClass::AdDfPlus));
                assert!(part.facets[f].scalars.un_samples.iter().all(|&v| v == 0.0));
                assert_eq!(part.facets[f].scalars.a_max, [1.0, 0.0]);
            }
        }
    }

    #[test]
    fn ambiguous_facet_reported() {
        let mesh = build_structured_triangular(2, Rectangle::unit()).unwrap();
        // Diffusion switches off at x = 0.25, in the middle of facets.
        let a = TensorField::new(|x: Point<f64>| {
            let s = if x[0] < 0.25 { 1.0 } else { 0.0 };
            [[s, 0.0], [0.0, s]]
        });
        let p = problem(a, [1.0, 0.0], true);
        assert!(matches!(
            classify(&mesh, &p),
            Err(Error::ClassificationAmbiguity { .. })
        ));
    }

    #[test]
    fn dominance_examples() {
        assert_eq!(dominance_split(0.1, 2, 1.0, &[1.0, -0.5]), Dominance::Dfd);
        assert_eq!(dominance_split(0.1, 2, 1e-6, &[0.99, 1.0]), Dominance::Add);
        assert_eq!(dominance_split(0.1, 2, 1e-6, &[0.0, 0.0]), Dominance::Dfd);
    }

    #[test]
    fn a_lambda_examples() {
        let dfdf = FacetClass::Interior(InteriorClass::DfDfDfd);
        assert_eq!(compute_a_lambda(dfdf, [1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(compute_a_lambda(dfdf, [2.0, 4.0]).unwrap(), 3.0);
        let dfd = FacetClass::Boundary(BoundaryClass::DfD { inflow: false });
        assert_eq!(compute_a_lambda(dfd, [5.0, 0.0]).unwrap(), 5.0);
        let ad = FacetClass::Interior(InteriorClass::AdAd);
        assert!(matches!(compute_a_lambda(ad, [0.0, 0.0]), Err(Error::Logic(_))));
    }

    #[test]
    fn a_lambda_on_dirichlet_wall_uses_normal_component() {
        let mesh = build_structured_triangular(2, Rectangle::unit()).unwrap();
        let p = problem(TensorField::constant([[5.0, 0.0], [0.0, 1.0]]), [0.0, 0.0], true);
        let part = classify(&mesh, &p).unwrap();
        let right = facet_where(&mesh, |x, _| x[0] == 1.0);
        assert_eq!(part.a_lambda(right).unwrap(), 5.0);
        let top = facet_where(&mesh, |x, _| x[1] == 1.0);
        assert_eq!(part.a_lambda(top).unwrap(), 1.0);
    }

    #[test]
    fn epsilon_df_takes_neighbouring_a_lambda() {
        // Two triangles: A = I on K0, A = 3I on K1 across the diagonal.
        let mesh = build_structured_triangular(1, Rectangle::unit()).unwrap();
        let a = TensorField::piecewise(vec![TensorField::isotropic(1.0), TensorField::isotropic(3.0)]);
        let mut p = problem(a, [0.0, 0.0], false);
        p.regions = Some(Arc::new(|x: Point<f64>| usize::from(x[1] > x[0])));
        let part = classify(&mesh, &p).unwrap();
        assert!((part.a_max_element[0] - 1.0).abs() < 1e-14);
        assert!((part.a_max_element[1] - 3.0).abs() < 1e-14);
        // The diagonal has A_Λ = 2, boundary Neumann facets carry no A_Λ.
        assert!((part.eps_df[0] - 2.0).abs() < 1e-14);
        assert!((part.eps_df[1] - 3.0).abs() < 1e-14);

        let eps = 1e-3;
        let uniform = problem(TensorField::isotropic(eps), [1.0, 1.0], true);
        let part = classify(&mesh, &uniform).unwrap();
        assert!(part.eps_df.iter().all(|&e| (e - eps).abs() < 1e-18));
    }

    #[test]
    fn classification_is_stable_under_refinement() {
        let p = builtin_problem::<f64>("degenerate_interface").unwrap();
        for n in [4, 8, 16] {
            let mesh = build_structured_triangular(n, Rectangle::unit()).unwrap();
            let part = classify(&mesh, &p).unwrap();
            for (f, geom) in mesh.facets.iter().enumerate() {
                let x = geom.midpoint[0];
                let class = part.class(f);
                if geom.is_boundary() {
                    continue;
                }
                if (x - 0.5).abs() < 1e-12 && geom.normal[1] == 0.0 {
                    assert_eq!(class, FacetClass::Interior(InteriorClass::AdDfPlus));
                } else if x < 0.5 {
                    assert!(class.is_df_df());
                } else {
                    assert_eq!(class, FacetClass::Interior(InteriorClass::AdAd));
                }
            }
        }
    }

    #[test]
    fn separate_entry_points_agree_with_full_classification() {
        let mesh = build_structured_triangular(4, Rectangle::unit()).unwrap();
        let p = builtin_problem::<f64>("polynomial_exactness(1)").unwrap();
        let cfg = ClassifyConfig::default();
        let full = classify(&mesh, &p).unwrap();
        for (f, c) in classify_boundary(&mesh, &p, &cfg).unwrap() {
            assert_eq!(full.class(f), FacetClass::Boundary(c));
        }
        for (f, c) in classify_interior(&mesh, &p, &cfg).unwrap() {
            assert_eq!(full.class(f), FacetClass::Interior(c));
        }
    }
}
