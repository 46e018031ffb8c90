//! Assembly of the stabilized DG operator and load vector.
//!
//! Jumps on interior facets are `[v] = v|K1 − v|K2` with `n_Λ` pointing out
//! of `K1`; on boundary facets `[v] = v` and `{w} = w`. The upwind term uses
//! the element-local reading: on `∂₋K` the jump is the trace from `K` minus
//! the trace from the upwind neighbour.

pub mod norm;
pub mod stabilization;

use std::ops::BitOr;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::partition::{BoundaryClass, Dominance, FacetClass, Partition};
use crate::problem::ProblemData;
use crate::scalar::{dot, double_dot, mat_vec, Real};
use crate::space::{DGSpace, Upto};
use crate::sparse::CsrMatrix;

pub use norm::{advection_identity_check, dg_energy_norm, energy_norm_terms, AdvectionResiduals, NormQuadrature, NormTerms};
pub use stabilization::{
    alpha_bound, compute_d_k, estimate_c_inv, tau_denominator, tau_from, Stabilization, StabilizationConfig,
    TauVariant,
};

/// Which facets carry the jump penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Diffusion-dominated df-df facets and diffusion-dominated df,D facets.
    MinimalDfd,
    /// All df-df and df,D facets.
    FullDf,
    /// Every interior facet plus the boundary facets carrying Dirichlet data,
    /// weighted `max(A_Λ, 1) / h_Λ`.
    LegacyAll,
}

impl PenaltyMode {
    pub const ALL: [PenaltyMode; 3] = [PenaltyMode::MinimalDfd, PenaltyMode::FullDf, PenaltyMode::LegacyAll];

    pub fn label(&self) -> &'static str {
        match self {
            PenaltyMode::MinimalDfd => "minimal",
            PenaltyMode::FullDf => "full-df",
            PenaltyMode::LegacyAll => "legacy-all",
        }
    }
}

impl FromStr for PenaltyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('_', "-").as_str() {
            "minimal" | "minimal-dfd" => Ok(PenaltyMode::MinimalDfd),
            "full-df" | "full" => Ok(PenaltyMode::FullDf),
            "legacy-all" | "legacy" => Ok(PenaltyMode::LegacyAll),
            other => Err(Error::InvalidArgument(format!("unknown penalty mode `{other}`"))),
        }
    }
}

/// Subset of the bilinear form's terms, for testing pieces in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Terms(u16);

impl Terms {
    /// `(A∇c, ∇v)`.
    pub const DIFFUSION: Terms = Terms(1);
    /// `−⟨{A∇c·n}, [v]⟩`.
    pub const FLUX_CONSISTENCY: Terms = Terms(1 << 1);
    /// `+⟨{A∇v·n}, [c]⟩` and its Dirichlet lifting.
    pub const FLUX_ADJOINT: Terms = Terms(1 << 2);
    /// Jump penalty and its Dirichlet data.
    pub const PENALTY: Terms = Terms(1 << 3);
    /// `(u·∇c + ½ div u c, v)`.
    pub const ADVECTION: Terms = Terms(1 << 4);
    /// Upwind jumps on `∂₋K` and inflow data.
    pub const UPWIND: Terms = Terms(1 << 5);
    /// `(γ0 c, v)`.
    pub const REACTION: Terms = Terms(1 << 6);
    /// `S_h` and `T_h`.
    pub const SUPG: Terms = Terms(1 << 7);
    pub const ALL: Terms = Terms((1 << 8) - 1);
    pub const NONE: Terms = Terms(0);

    pub fn contains(&self, other: Terms) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn without(self, other: Terms) -> Terms {
        Terms(self.0 & !other.0)
    }
}

impl BitOr for Terms {
    type Output = Terms;

    fn bitor(self, rhs: Terms) -> Terms {
        Terms(self.0 | rhs.0)
    }
}

/// Linear system `A c = b` with the settings that produced it.
#[derive(Debug, Clone)]
pub struct AssembledSystem<T> {
    pub matrix: CsrMatrix<T>,
    pub rhs: Vec<T>,
    pub mode: PenaltyMode,
    pub alpha: T,
    pub c_inv: T,
    pub tau: TauVariant,
    /// Elements where `τ_K` had a vanishing denominator.
    pub flagged_elements: Vec<usize>,
}

impl<T: Real> AssembledSystem<T> {
    pub fn num_dofs(&self) -> usize {
        self.rhs.len()
    }
}

/// Penalty weight on facet `f` under `mode`, or `None` if unpenalised.
pub fn penalty_weight<T: Real>(mode: PenaltyMode, mesh: &Mesh<T>, partition: &Partition<T>, f: usize) -> Option<T> {
    let info = &partition.facets[f];
    let geom = &mesh.facets[f];
    let scale = || geom.measure.powf(-T::one() / T::from_count(mesh.dim - 1));
    match mode {
        PenaltyMode::MinimalDfd => (info.class.is_diffusive_coupling() && info.dominance == Some(Dominance::Dfd))
            .then(|| info.scalars.a_lambda.map(|a| a * scale()))
            .flatten(),
        PenaltyMode::FullDf => info
            .class
            .is_diffusive_coupling()
            .then(|| info.scalars.a_lambda.map(|a| a * scale()))
            .flatten(),
        PenaltyMode::LegacyAll => {
            let carries = match info.class {
                FacetClass::Interior(_) => true,
                FacetClass::Boundary(b) => matches!(b, BoundaryClass::DfD { .. } | BoundaryClass::AdMinus),
            };
            carries.then(|| info.scalars.a_lambda.unwrap_or(T::zero()).max(T::one()) / geom.diameter)
        }
    }
}

/// Whether the boundary upwind term acts at a point with normal velocity `un`.
pub(crate) fn boundary_inflow<T: Real>(class: FacetClass, un: T) -> bool {
    match class {
        FacetClass::Boundary(BoundaryClass::DfNMinus) => true,
        FacetClass::Boundary(BoundaryClass::DfNPlus) => false,
        FacetClass::Boundary(_) => un < T::zero(),
        FacetClass::Interior(_) => false,
    }
}

struct LocalBlock<T> {
    rows: Vec<usize>,
    matrix: Vec<T>,
    rhs: Vec<T>,
    flagged: bool,
}

impl<T: Real> LocalBlock<T> {
    fn check(&self, what: &str, id: usize) -> Result<()> {
        if self.matrix.iter().chain(&self.rhs).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                location: format!("{what} {id}"),
            })
        }
    }
}

fn element_block<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    stab: &Stabilization<T>,
    terms: Terms,
    k: usize,
) -> LocalBlock<T> {
    let m = space.local_dim();
    let r = stab.regions[k];
    let supg = terms.contains(Terms::SUPG);
    let tab = space.tabulate(k, if supg { Upto::Hessian } else { Upto::Gradient });
    let mut mat = vec![T::zero(); m * m];
    let mut rhs = vec![T::zero(); m];
    let mut flagged = false;
    let mut aflux = vec![[T::zero(); 2]; m];
    let mut adv = vec![T::zero(); m];
    let mut lop = vec![T::zero(); m];
    let mut mop = vec![T::zero(); m];
    for ((&x, &w), b) in tab.points.iter().zip(&tab.weights).zip(&tab.basis) {
        let a = problem.a_at(x, r);
        let u = problem.u_at(x, r);
        let div_u = problem.div_u_at(x, r);
        let gamma0 = problem.gamma0_at(x, r);
        let g = problem.g_at(x, r);
        let div_a = problem.div_a_at(x, r);
        let tau = if supg {
            stab.tau(problem, k, x).unwrap_or_else(|| {
                flagged = true;
                T::zero()
            })
        } else {
            T::zero()
        };
        for j in 0..m {
            let grad = b.grads[j];
            aflux[j] = mat_vec(&a, grad);
            adv[j] = dot(u, grad) + T::half() * div_u * b.values[j];
            if supg {
                let h = &b.hessians[j];
                let div_flux = double_dot(&a, h) + dot(div_a, grad);
                lop[j] = -div_flux + adv[j] + gamma0 * b.values[j];
                mop[j] = adv[j] - gamma0 * b.values[j];
            }
        }
        for i in 0..m {
            let vi = b.values[i];
            let gi = b.grads[i];
            let row = &mut mat[i * m..(i + 1) * m];
            for j in 0..m {
                let mut s = T::zero();
                if terms.contains(Terms::DIFFUSION) {
                    s += dot(aflux[j], gi);
                }
                if terms.contains(Terms::ADVECTION) {
                    s += adv[j] * vi;
                }
                if terms.contains(Terms::REACTION) {
                    s += gamma0 * b.values[j] * vi;
                }
                if supg {
                    s += tau * lop[j] * mop[i];
                }
                row[j] += w * s;
            }
            rhs[i] += w * g * vi;
            if supg {
                rhs[i] += w * tau * g * mop[i];
            }
        }
    }
    LocalBlock {
        rows: space.dof_range(k).collect(),
        matrix: mat,
        rhs,
        flagged,
    }
}

fn facet_block<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    partition: &Partition<T>,
    stab: &Stabilization<T>,
    mode: PenaltyMode,
    terms: Terms,
    f: usize,
) -> LocalBlock<T> {
    let mesh = space.mesh;
    let geom = &mesh.facets[f];
    let class = partition.facets[f].class;
    let n = geom.normal;
    let m = space.local_dim();
    let sides: Vec<usize> = std::iter::once(geom.k1).chain(geom.k2).collect();
    let ns = sides.len();
    let dim = ns * m;
    let sigma = [T::one(), -T::one()];
    let avg = if ns == 2 { T::half() } else { T::one() };
    let coupling = class.is_diffusive_coupling();
    let penalty = penalty_weight(mode, mesh, partition, f).filter(|_| terms.contains(Terms::PENALTY));
    let (pts, wts) = space.facet_points(f);

    let mut mat = vec![T::zero(); dim * dim];
    let mut rhs = vec![T::zero(); dim];
    // Per point: values and normal fluxes of every local function, side-major.
    let mut phi = vec![T::zero(); dim];
    let mut flux = vec![T::zero(); dim];
    for (&x, &w) in pts.iter().zip(&wts) {
        for (s, &k) in sides.iter().enumerate() {
            let b = space.eval_basis_on(k, x, Upto::Gradient);
            let a = problem.a_at(x, stab.regions[k]);
            for i in 0..m {
                phi[s * m + i] = sigma[s] * b.values[i];
                flux[s * m + i] = dot(mat_vec(&a, b.grads[i]), n);
            }
        }
        let un = sides
            .iter()
            .map(|&k| dot(problem.u_at(x, stab.regions[k]), n))
            .fold(T::zero(), |acc, v| acc + v)
            / T::from_count(ns);

        // phi carries the jump sign, so phi[a] is the contribution of local
        // function a to [v].
        for a in 0..dim {
            let row = &mut mat[a * dim..(a + 1) * dim];
            for c in 0..dim {
                let mut s = T::zero();
                if coupling {
                    if terms.contains(Terms::FLUX_CONSISTENCY) {
                        s -= avg * flux[c] * phi[a];
                    }
                    if terms.contains(Terms::FLUX_ADJOINT) {
                        s += avg * flux[a] * phi[c];
                    }
                }
                if let Some(p) = penalty {
                    s += p * phi[a] * phi[c];
                }
                row[c] += w * s;
            }
        }

        if terms.contains(Terms::UPWIND) {
            if ns == 2 {
                // Inflow side receives −(u·n_K) v_in [c].
                let recv = if un < T::zero() {
                    Some(0)
                } else if un > T::zero() {
                    Some(1)
                } else {
                    None
                };
                if let Some(s_in) = recv {
                    for i in 0..m {
                        let a = s_in * m + i;
                        let v_in = sigma[s_in] * phi[a];
                        for c in 0..dim {
                            mat[a * dim + c] -= w * un * v_in * phi[c];
                        }
                    }
                }
            } else if boundary_inflow(class, un) {
                for a in 0..m {
                    for c in 0..m {
                        mat[a * dim + c] -= w * un * phi[a] * phi[c];
                    }
                }
            }
        }

        if ns == 1 {
            let r = stab.regions[geom.k1];
            match class {
                FacetClass::Boundary(BoundaryClass::DfNMinus) => {
                    let chi = problem.chi_minus.branch(r)(x, n);
                    for a in 0..m {
                        rhs[a] -= w * chi * phi[a];
                    }
                }
                FacetClass::Boundary(BoundaryClass::DfNPlus) => {
                    let chi = problem.chi_plus.branch(r)(x, n);
                    for a in 0..m {
                        rhs[a] -= w * chi * phi[a];
                    }
                }
                _ => {
                    let kappa = problem.kappa_at(x, r);
                    for a in 0..m {
                        let mut s = T::zero();
                        if coupling && terms.contains(Terms::FLUX_ADJOINT) {
                            s += flux[a] * kappa;
                        }
                        if let Some(p) = penalty {
                            s += p * kappa * phi[a];
                        }
                        if terms.contains(Terms::UPWIND) && boundary_inflow(class, un) {
                            s -= un * kappa * phi[a];
                        }
                        rhs[a] += w * s;
                    }
                }
            }
        }
    }
    let rows = sides.iter().flat_map(|&k| space.dof_range(k)).collect();
    LocalBlock {
        rows,
        matrix: mat,
        rhs,
        flagged: false,
    }
}

/// Assembles the full operator and load vector.
pub fn assemble<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    partition: &Partition<T>,
    mode: PenaltyMode,
    cfg: &StabilizationConfig,
) -> Result<AssembledSystem<T>> {
    let stab = Stabilization::new(space, problem, partition, cfg)?;
    assemble_with(space, problem, partition, mode, &stab, Terms::ALL)
}

/// Assembles the selected terms with a resolved stabilization.
pub fn assemble_with<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    partition: &Partition<T>,
    mode: PenaltyMode,
    stab: &Stabilization<T>,
    terms: Terms,
) -> Result<AssembledSystem<T>> {
    let mesh = space.mesh;
    if partition.facets.len() != mesh.num_facets() {
        return Err(Error::InvalidArgument(format!(
            "partition has {} facets, mesh has {}",
            partition.facets.len(),
            mesh.num_facets()
        )));
    }
    let elements: Vec<LocalBlock<T>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let b = element_block(space, problem, stab, terms, k);
            b.check("element", k).map(|_| b)
        })
        .collect::<Result<_>>()?;
    let facets: Vec<LocalBlock<T>> = (0..mesh.num_facets())
        .into_par_iter()
        .map(|f| {
            let b = facet_block(space, problem, partition, stab, mode, terms, f);
            b.check("facet", f).map(|_| b)
        })
        .collect::<Result<_>>()?;

    let ndofs = space.num_dofs();
    let mut rhs = vec![T::zero(); ndofs];
    let mut triplets = Vec::with_capacity(
        elements.iter().chain(&facets).map(|b| b.matrix.len()).sum(),
    );
    let mut flagged_elements = Vec::new();
    for (k, b) in elements.iter().enumerate() {
        if b.flagged {
            flagged_elements.push(k);
        }
    }
    for b in elements.iter().chain(&facets) {
        let d = b.rows.len();
        for (a, &ra) in b.rows.iter().enumerate() {
            rhs[ra] += b.rhs[a];
            for (c, &rc) in b.rows.iter().enumerate() {
                let v = b.matrix[a * d + c];
                if v != T::zero() || ra == rc {
                    triplets.push((ra, rc, v));
                }
            }
        }
    }
    if !flagged_elements.is_empty() {
        log::info!(
            "tau vanishes on {} element(s); stabilization is inactive there",
            flagged_elements.len()
        );
    }
    Ok(AssembledSystem {
        matrix: CsrMatrix::from_triplets(ndofs, ndofs, triplets),
        rhs,
        mode,
        alpha: stab.alpha,
        c_inv: stab.c_inv,
        tau: stab.variant,
        flagged_elements,
    })
}
