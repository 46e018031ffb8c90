//! The DG energy norm and the advection identities, evaluated term by term
//! on broken functions.

use serde::Serialize;

use super::stabilization::Stabilization;
use super::{penalty_weight, PenaltyMode};
use crate::mesh::Mesh;
use crate::partition::Partition;
use crate::problem::ProblemData;
use crate::scalar::{dot, double_dot, mat_vec, Point, Real};
use crate::space::quadrature::{SegmentRule, TriangleRule};
use crate::space::{AffineMap, DGSpace, Jet};

/// Quadrature used to evaluate norms.
#[derive(Debug, Clone)]
pub struct NormQuadrature<T> {
    pub volume: TriangleRule<T>,
    pub facet: SegmentRule<T>,
}

impl<T: Real> NormQuadrature<T> {
    /// The assembly rules of `space`; norms of discrete functions then match
    /// the assembled form to rounding.
    pub fn assembly(space: &DGSpace<'_, T>) -> Self {
        Self {
            volume: space.volume_rule.clone(),
            facet: space.facet_rule.clone(),
        }
    }

    /// Rules exact to degree `2ℓ + 4`, for errors against exact solutions.
    pub fn elevated(space: &DGSpace<'_, T>) -> Self {
        let d = 2 * space.degree + 4;
        Self {
            volume: TriangleRule::with_degree(d),
            facet: SegmentRule::with_degree(d),
        }
    }
}

/// Squared contributions to the energy norm.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NormTerms<T> {
    /// `‖A^{1/2}∇v‖²`.
    pub diffusion: T,
    /// Penalty on the mode's facet set.
    pub penalty: T,
    /// `½ Σ_int ⟨|u·n|, [v]²⟩`.
    pub interior_advection: T,
    /// `½ Σ_bdry ⟨|u·n|, v²⟩`.
    pub boundary_advection: T,
    /// `‖γ0^{1/2} v‖²`.
    pub reaction: T,
    /// `S_h(v, v)`, not termwise nonnegative.
    pub supg: T,
    /// `‖τ^{1/2}(u·∇v + ½ div u v)‖²`; not part of the norm.
    pub supg_advection: T,
}

impl<T: Real> NormTerms<T> {
    pub fn total(&self) -> T {
        self.diffusion + self.penalty + self.interior_advection + self.boundary_advection + self.reaction + self.supg
    }

    /// Sum of absolute values, the natural scale for identity residuals.
    pub fn magnitude(&self) -> T {
        self.diffusion.abs()
            + self.penalty.abs()
            + self.interior_advection.abs()
            + self.boundary_advection.abs()
            + self.reaction.abs()
            + self.supg.abs()
    }
}

fn facet_samples<T: Real>(mesh: &Mesh<T>, rule: &SegmentRule<T>, f: usize) -> std::vec::IntoIter<(Point<T>, T)> {
    let geom = &mesh.facets[f];
    let verts = &mesh.vertices;
    let pts: Vec<(Point<T>, T)> = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| (geom.point_at(verts, s), w * geom.measure))
        .collect();
    pts.into_iter()
}

fn volume_samples<T: Real>(map: &AffineMap<T>, rule: &TriangleRule<T>) -> std::vec::IntoIter<(Point<T>, T)> {
    let pts: Vec<(Point<T>, T)> = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&p, &w)| (map.to_physical(p), w * map.det))
        .collect();
    pts.into_iter()
}

fn facet_un<T: Real>(problem: &ProblemData<T>, regions: &[usize], sides: &[usize], x: Point<T>, n: Point<T>) -> T {
    sides
        .iter()
        .map(|&k| dot(problem.u_at(x, regions[k]), n))
        .fold(T::zero(), |a, b| a + b)
        / T::from_count(sides.len())
}

/// Energy-norm terms of the broken function `v`, given as its jet on each
/// element (`v(k, x)` for `x` in the closure of element `k`).
pub fn energy_norm_terms<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    partition: &Partition<T>,
    mode: PenaltyMode,
    stab: &Stabilization<T>,
    quad: &NormQuadrature<T>,
    v: &(dyn Fn(usize, Point<T>) -> Jet<T> + Sync),
) -> NormTerms<T> {
    let mesh = space.mesh;
    let regions = &stab.regions;
    let mut t = NormTerms::default();
    for k in 0..mesh.num_elements() {
        let r = regions[k];
        for (x, w) in volume_samples(&space.maps[k], &quad.volume) {
            let j = v(k, x);
            let a = problem.a_at(x, r);
            let u = problem.u_at(x, r);
            let div_u = problem.div_u_at(x, r);
            let gamma0 = problem.gamma0_at(x, r);
            let div_a = problem.div_a_at(x, r);
            t.diffusion += w * dot(mat_vec(&a, j.grad), j.grad);
            t.reaction += w * gamma0 * j.value * j.value;
            let adv = dot(u, j.grad) + T::half() * div_u * j.value;
            if let Some(tau) = stab.tau(problem, k, x) {
                let h = &j.hess;
                let div_flux = double_dot(&a, h) + dot(div_a, j.grad);
                let lv = -div_flux + adv + gamma0 * j.value;
                let mv = adv - gamma0 * j.value;
                t.supg += w * tau * lv * mv;
                t.supg_advection += w * tau * adv * adv;
            }
        }
    }
    for (f, geom) in mesh.facets.iter().enumerate() {
        let sides: Vec<usize> = std::iter::once(geom.k1).chain(geom.k2).collect();
        let pen = penalty_weight(mode, mesh, partition, f);
        for (x, w) in facet_samples(mesh, &quad.facet, f) {
            let jump = match geom.k2 {
                Some(k2) => v(geom.k1, x).value - v(k2, x).value,
                None => v(geom.k1, x).value,
            };
            let un = facet_un(problem, regions, &sides, x, geom.normal);
            if let Some(p) = pen {
                t.penalty += w * p * jump * jump;
            }
            if geom.is_boundary() {
                t.boundary_advection += w * T::half() * un.abs() * jump * jump;
            } else {
                t.interior_advection += w * T::half() * un.abs() * jump * jump;
            }
        }
    }
    t
}

/// `‖v‖` in the energy norm for a DOF vector, with the assembly quadrature.
pub fn dg_energy_norm<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    partition: &Partition<T>,
    mode: PenaltyMode,
    stab: &Stabilization<T>,
    dofs: &[T],
) -> T {
    let quad = NormQuadrature::assembly(space);
    let v = |k: usize, x: Point<T>| space.eval_function(k, dofs, x);
    energy_norm_terms(space, problem, partition, mode, stab, &quad, &v)
        .total()
        .max(T::zero())
        .sqrt()
}

/// `|LHS − RHS|` of the advection coercivity and duality identities, with
/// the sums of absolute term values as scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvectionResiduals<T> {
    pub coercivity: T,
    pub coercivity_scale: T,
    pub duality: T,
    pub duality_scale: T,
}

/// Evaluates both advection identities for DOF vectors `v` and `w`. Jumps
/// on `∂K` are element-local: trace from `K` minus trace from outside, with
/// zero outside the domain.
pub fn advection_identity_check<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    v: &[T],
    w: &[T],
) -> AdvectionResiduals<T> {
    let mesh = space.mesh;
    let regions = space.element_regions(problem);
    let quad = NormQuadrature::assembly(space);
    let (mut c_vol, mut c_up, mut c_jump) = (T::zero(), T::zero(), T::zero());
    let (mut d_vol_vw, mut d_up, mut d_vol_wv, mut d_down) = (T::zero(), T::zero(), T::zero(), T::zero());
    let mut scale_c = T::zero();
    let mut scale_d = T::zero();
    for k in 0..mesh.num_elements() {
        let r = regions[k];
        for (x, wt) in volume_samples(&space.maps[k], &quad.volume) {
            let jv = space.eval_function(k, v, x);
            let jw = space.eval_function(k, w, x);
            let u = problem.u_at(x, r);
            let half_div = T::half() * problem.div_u_at(x, r);
            let av = dot(u, jv.grad) + half_div * jv.value;
            let aw = dot(u, jw.grad) + half_div * jw.value;
            c_vol += wt * av * jv.value;
            d_vol_vw += wt * av * jw.value;
            d_vol_wv += wt * jv.value * aw;
            scale_c += (wt * av * jv.value).abs();
            scale_d += (wt * av * jw.value).abs() + (wt * jv.value * aw).abs();
        }
    }
    for (f, geom) in mesh.facets.iter().enumerate() {
        let sides: Vec<usize> = std::iter::once(geom.k1).chain(geom.k2).collect();
        for (x, wt) in facet_samples(mesh, &quad.facet, f) {
            let un = facet_un(problem, &regions, &sides, x, geom.normal);
            // Per side: outward u·n_K, own traces, outside traces.
            for (s, &k) in sides.iter().enumerate() {
                let un_k = if s == 0 { un } else { -un };
                let (v_in, w_in) = (space.eval_function(k, v, x).value, space.eval_function(k, w, x).value);
                let (v_out, w_out) = match sides.get(1 - s) {
                    Some(&o) if sides.len() == 2 => (space.eval_function(o, v, x).value, space.eval_function(o, w, x).value),
                    _ => (T::zero(), T::zero()),
                };
                if un_k < T::zero() {
                    let cv = wt * v_in * un_k * (v_in - v_out);
                    let dv = wt * w_in * un_k * (v_in - v_out);
                    c_up += cv;
                    d_up += dv;
                    scale_c += cv.abs();
                    scale_d += dv.abs();
                } else if un_k > T::zero() {
                    let dd = wt * v_in * un_k * (w_in - w_out);
                    d_down += dd;
                    scale_d += dd.abs();
                }
            }
            let jump = if sides.len() == 2 {
                space.eval_function(sides[0], v, x).value - space.eval_function(sides[1], v, x).value
            } else {
                space.eval_function(sides[0], v, x).value
            };
            let term = wt * T::half() * un.abs() * jump * jump;
            c_jump += term;
            scale_c += term.abs();
        }
    }
    AdvectionResiduals {
        coercivity: (c_vol - c_up - c_jump).abs(),
        coercivity_scale: scale_c,
        duality: (d_vol_vw - d_up + d_vol_wv - d_down).abs(),
        duality_scale: scale_d,
    }
}
