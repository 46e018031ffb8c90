//! SUPG parameter `τ_K`, the element scale `D_K` and the inverse constant.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::partition::Partition;
use crate::problem::ProblemData;
use crate::scalar::{dot, norm2, Point, Real};
use crate::space::{DGSpace, Upto};

/// How `τ_K` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauVariant {
    /// `α h² / (ε_df,K + h|u(x)| + h²|div u(x)| + h²|γ0(x)|)`.
    Pointwise,
    /// `α h² / D_K`, constant per element.
    DkBased,
}

impl FromStr for TauVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pointwise" => Ok(TauVariant::Pointwise),
            "dk" | "dk_based" | "dk-based" => Ok(TauVariant::DkBased),
            other => Err(Error::InvalidArgument(format!("unknown tau variant `{other}`"))),
        }
    }
}

impl TauVariant {
    pub fn label(&self) -> &'static str {
        match self {
            TauVariant::Pointwise => "pointwise",
            TauVariant::DkBased => "dk",
        }
    }
}

/// User-facing stabilization settings; unset values are derived from the space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizationConfig {
    pub alpha: Option<f64>,
    pub tau: TauVariant,
    pub c_inv: Option<f64>,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            tau: TauVariant::Pointwise,
            c_inv: None,
        }
    }
}

/// Admissible bound `min(2/3, 1/C_inv²)` for `α`.
pub fn alpha_bound(c_inv: f64) -> f64 {
    (2.0 / 3.0f64).min(1.0 / (c_inv * c_inv))
}

/// Resolved stabilization for one mesh and problem.
#[derive(Debug, Clone)]
pub struct Stabilization<T> {
    pub alpha: T,
    pub c_inv: T,
    pub variant: TauVariant,
    /// `ε_df,K` per element.
    pub eps_df: Vec<T>,
    /// `D_K` per element, for the `DkBased` variant.
    pub d_k: Option<Vec<T>>,
    pub h: Vec<T>,
    pub regions: Vec<usize>,
}

impl<T: Real> Stabilization<T> {
    pub fn new(
        space: &DGSpace<'_, T>,
        problem: &ProblemData<T>,
        partition: &Partition<T>,
        cfg: &StabilizationConfig,
    ) -> Result<Self> {
        let c_inv = match cfg.c_inv {
            Some(c) if c > 0.0 && c.is_finite() => c,
            Some(c) => return Err(Error::InvalidArgument(format!("C_inv must be positive, got {c}"))),
            None => estimate_c_inv(space).as_f64(),
        };
        let bound = alpha_bound(c_inv);
        let alpha = match cfg.alpha {
            Some(a) if a > 0.0 && a.is_finite() => a,
            Some(a) => return Err(Error::InvalidArgument(format!("alpha must be positive, got {a}"))),
            None => 0.25 * bound,
        };
        if alpha >= bound {
            log::warn!("alpha = {alpha:.4e} is not below min(2/3, 1/C_inv^2) = {bound:.4e}; SUPG coercivity is not guaranteed");
        }
        let mesh = space.mesh;
        let regions = space.element_regions(problem);
        let d_k = match cfg.tau {
            TauVariant::Pointwise => None,
            TauVariant::DkBased => Some(
                (0..mesh.num_elements())
                    .map(|k| compute_d_k(space, problem, partition, k))
                    .collect(),
            ),
        };
        Ok(Self {
            alpha: T::lit(alpha),
            c_inv: T::lit(c_inv),
            variant: cfg.tau,
            eps_df: partition.eps_df.clone(),
            d_k,
            h: mesh.diameters.clone(),
            regions,
        })
    }

    /// `τ_K(x)`; `None` when the denominator vanishes (stabilization is
    /// switched off on `K`).
    pub fn tau(&self, problem: &ProblemData<T>, k: usize, x: Point<T>) -> Option<T> {
        let h = self.h[k];
        let denom = match &self.d_k {
            Some(d) => d[k],
            None => {
                let r = self.regions[k];
                tau_denominator(
                    self.eps_df[k],
                    h,
                    norm2(problem.u_at(x, r)),
                    problem.div_u_at(x, r),
                    problem.gamma0_at(x, r),
                )
            }
        };
        tau_from(self.alpha, h, denom)
    }
}

/// `ε + h|u| + h²|div u| + h²|γ0|`.
pub fn tau_denominator<T: Real>(eps: T, h: T, u_norm: T, div_u: T, gamma0: T) -> T {
    eps + h * u_norm + h * h * (div_u.abs() + gamma0.abs())
}

/// `α h² / denom`, or `None` if `denom` is zero.
pub fn tau_from<T: Real>(alpha: T, h: T, denom: T) -> Option<T> {
    if denom > T::zero() {
        Some(alpha * h * h / denom)
    } else {
        None
    }
}

/// `D_K = ε_df,K + h²|K|⁻¹‖u·n‖_{L¹(∂K)} + h|K|^{-1/2}‖u‖_{L²(K)}
///        + h²|K|^{-1/2}(‖div u‖_{L²(K)} + ‖γ0‖_{L²(K)})`.
pub fn compute_d_k<T: Real>(space: &DGSpace<'_, T>, problem: &ProblemData<T>, partition: &Partition<T>, k: usize) -> T {
    let mesh: &Mesh<T> = space.mesh;
    let r = problem.region_of(mesh.centroids[k]);
    let (h, area) = (mesh.diameters[k], mesh.areas[k]);
    let mut un_l1 = T::zero();
    for &f in &mesh.element_facets[k] {
        let n = mesh.outward_normal(k, f);
        let (pts, wts) = space.facet_points(f);
        for (x, w) in pts.into_iter().zip(wts) {
            un_l1 += w * dot(problem.u_at(x, r), n).abs();
        }
    }
    let tab = space.tabulate(k, Upto::Value);
    let (mut u2, mut du2, mut g2) = (T::zero(), T::zero(), T::zero());
    for (&x, &w) in tab.points.iter().zip(&tab.weights) {
        let u = problem.u_at(x, r);
        u2 += w * dot(u, u);
        du2 += w * problem.div_u_at(x, r).powi(2);
        g2 += w * problem.gamma0_at(x, r).powi(2);
    }
    let inv_sqrt_area = area.sqrt().recip();
    partition.eps_df[k]
        + h * h / area * un_l1
        + h * inv_sqrt_area * u2.sqrt()
        + h * h * inv_sqrt_area * (du2.sqrt() + g2.sqrt())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<T: Real>(mut a: Vec<Vec<T>>) -> Vec<T> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: T = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= T::epsilon() * T::epsilon() * diag {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::two() * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Mesh maximum of `h_K |q|_{H¹(K)} / ‖q‖_{L²(K)}` over the local space.
pub fn estimate_c_inv<T: Real>(space: &DGSpace<'_, T>) -> T {
    let m = space.local_dim();
    (0..space.mesh.num_elements())
        .map(|k| {
            let tab = space.tabulate(k, Upto::Gradient);
            let mut s = vec![vec![T::zero(); m]; m];
            for (b, &w) in tab.basis.iter().zip(&tab.weights) {
                for i in 0..m {
                    for j in 0..m {
                        s[i][j] += w * dot(b.grads[i], b.grads[j]);
                    }
                }
            }
            // The basis is L²-orthonormal on the reference element, so the
            // physical mass matrix is det J times the identity.
            let det = space.maps[k].det;
            let lmax = symmetric_eigenvalues(s).into_iter().fold(T::zero(), T::max) / det;
            space.mesh.diameters[k] * lmax.sqrt()
        })
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_triangular, Rectangle};
    use crate::partition::classify;
    use crate::problem::{manufactured, ExactSolution, ScalarField, TensorField, VectorField};
    use std::sync::Arc;

    fn transport(u: [f64; 2], gamma: f64) -> ProblemData<f64> {
        manufactured(
            "transport",
            Rectangle::unit(),
            None,
            TensorField::isotropic(0.0),
            VectorField::constant(u),
            ScalarField::constant(0.0),
            ScalarField::constant(gamma),
            ExactSolution {
                value: ScalarField::constant(0.0),
                gradient: VectorField::constant([0.0, 0.0]),
                hessian: TensorField::constant([[0.0; 2]; 2]),
            },
            Arc::new(|_, _| true),
        )
    }

    #[test]
    fn tau_examples() {
        let d: f64 = tau_denominator(0.0, 0.1, 1.0, 0.0, 0.0);
        assert!((tau_from(0.5f64, 0.1, d).unwrap() - 0.05).abs() < 1e-15);
        let d: f64 = tau_denominator(1.0, 0.3, 0.0, 0.0, 0.0);
        assert!((tau_from(0.2f64, 0.3, d).unwrap() - 0.2 * 0.09).abs() < 1e-15);
        assert_eq!(tau_from(0.2, 0.3, tau_denominator(0.0, 0.3, 0.0, 0.0, 0.0)), None);
    }

    #[test]
    fn d_k_on_unit_right_triangle() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let space = DGSpace::new(&mesh, 1).unwrap();
        let p = transport([1.0, 0.0], 0.0);
        let part = classify(&mesh, &p).unwrap();
        let d = compute_d_k(&space, &p, &part, 0);
        assert!((d - (8.0 + 2f64.sqrt())).abs() < 1e-12, "{d}");

        let still = transport([0.0, 0.0], 0.0);
        let part = classify(&mesh, &still).unwrap();
        assert_eq!(compute_d_k(&space, &still, &part, 0), part.eps_df[0]);
    }

    #[test]
    fn d_k_scales_linearly_for_constant_velocity() {
        let d_k_at = |p: &ProblemData<f64>, n: usize| {
            let mesh = build_structured_triangular(n, Rectangle::unit()).unwrap();
            let space = DGSpace::new(&mesh, 1).unwrap();
            let part = classify(&mesh, p).unwrap();
            compute_d_k(&space, p, &part, 0)
        };
        // Without reaction every term is proportional to h.
        let pure = transport([1.0, 0.5], 0.0);
        let ratio = d_k_at(&pure, 8) / d_k_at(&pure, 16);
        assert!((ratio - 2.0).abs() < 1e-12, "{ratio}");
        // The reaction term adds an O(h²) part.
        let reactive = transport([1.0, 0.5], 1.0);
        let ratio = d_k_at(&reactive, 8) / d_k_at(&reactive, 16);
        assert!(ratio > 2.0 && ratio < 2.1, "{ratio}");
    }

    #[test]
    fn jacobi_eigenvalues() {
        let mut e = symmetric_eigenvalues(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn c_inv_is_scale_invariant() {
        for degree in 1..=4 {
            let c: Vec<f64> = [8, 16]
                .iter()
                .map(|&n| {
                    let mesh = build_structured_triangular(n, Rectangle::unit()).unwrap();
                    estimate_c_inv(&DGSpace::new(&mesh, degree).unwrap())
                })
                .collect();
            assert!(c[0].is_finite() && c[0] > 0.0);
            let ratio = c[0] / c[1];
            assert!((0.9..=1.1).contains(&ratio), "degree {degree}: {ratio}");
        }
    }

    #[test]
    fn c_inv_grows_with_degree() {
        let mesh = build_structured_triangular(2, Rectangle::unit()).unwrap();
        let c: Vec<f64> = (1..=3).map(|l| estimate_c_inv(&DGSpace::new(&mesh, l).unwrap())).collect();
        assert!(c[0] < c[1] && c[1] < c[2]);
    }

    #[test]
    fn invalid_alpha_rejected() {
        let mesh = build_structured_triangular(2, Rectangle::unit()).unwrap();
        let space = DGSpace::new(&mesh, 1).unwrap();
        let p = transport([1.0, 0.0], 1.0);
        let part = classify(&mesh, &p).unwrap();
        let cfg = StabilizationConfig {
            alpha: Some(-1.0),
            ..Default::default()
        };
        assert!(Stabilization::new(&space, &p, &part, &cfg).is_err());
        let s = Stabilization::new(&space, &p, &part, &StabilizationConfig::default()).unwrap();
        assert!((s.alpha - 0.25 * alpha_bound(s.c_inv)).abs() < 1e-15);
    }
}
