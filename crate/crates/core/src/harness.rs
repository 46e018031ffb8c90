//! Verification studies: convergence, consistency, penalty-mode comparison,
//! identity checks, and their CSV/JSON reports.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{
    advection_identity_check, alpha_bound, assemble, assemble_with, energy_norm_terms, NormQuadrature, PenaltyMode,
    Stabilization, StabilizationConfig, Terms,
};
use crate::error::{Error, Result};
use crate::mesh::{build_structured_triangular, Mesh, Rectangle};
use crate::partition::{classify, Partition};
use crate::problem::{builtin_problem, manufactured, ExactSolution, ProblemData, ScalarField, TensorField, VectorField};
use crate::scalar::{Point, Real};
use crate::solver::{solve, SolverConfig};
use crate::space::{DGSpace, Jet};
use crate::sparse::max_abs;

/// Discretisation settings shared by the studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyConfig {
    pub degree: usize,
    pub mode: PenaltyMode,
    pub stabilization: StabilizationConfig,
    pub solver: SolverConfig,
}

impl StudyConfig {
    pub fn new(degree: usize) -> Self {
        Self {
            degree,
            mode: PenaltyMode::MinimalDfd,
            stabilization: StabilizationConfig::default(),
            solver: SolverConfig::direct(),
        }
    }

    pub fn with_mode(mut self, mode: PenaltyMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Value, gradient and Hessian of the exact solution, using branch `r`.
pub fn exact_jet<T: Real>(exact: &ExactSolution<T>, x: Point<T>, r: usize) -> Jet<T> {
    Jet {
        value: exact.value.branch(r)(x),
        grad: exact.gradient.branch(r)(x),
        hess: exact.hessian.branch(r)(x),
    }
}

/// Error of a discrete solution against the exact one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    /// L2 error restricted to each region.
    pub l2_by_region: Vec<f64>,
    pub energy: f64,
}

/// L2 and energy errors of `dofs`, integrated exactly to degree `2ℓ + 4`.
pub fn error_norms<T: Real>(
    space: &DGSpace<'_, T>,
    problem: &ProblemData<T>,
    partition: &Partition<T>,
    mode: PenaltyMode,
    stab: &Stabilization<T>,
    dofs: &[T],
) -> Result<ErrorNorms> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("problem `{}` has no exact solution", problem.name)))?;
    let quad = NormQuadrature::elevated(space);
    let regions = &stab.regions;
    let nregions = regions.iter().copied().max().map_or(1, |m| m + 1);
    let mut by_region = vec![T::zero(); nregions];
    for (k, map) in space.maps.iter().enumerate() {
        for (&p, &w) in quad.volume.points.iter().zip(&quad.volume.weights) {
            let x = map.to_physical(p);
            let e = exact.value.branch(regions[k])(x) - space.eval_function(k, dofs, x).value;
            by_region[regions[k]] += w * map.det * e * e;
        }
    }
    let err = |k: usize, x: Point<T>| exact_jet(exact, x, regions[k]).minus(&space.eval_function(k, dofs, x));
    let terms = energy_norm_terms(space, problem, partition, mode, stab, &quad, &err);
    let l2 = by_region.iter().fold(T::zero(), |a, &b| a + b).sqrt();
    let out = ErrorNorms {
        l2: l2.as_f64(),
        l2_by_region: by_region.iter().map(|v| v.sqrt().as_f64()).collect(),
        energy: terms.total().max(T::zero()).sqrt().as_f64(),
    };
    if !(out.l2.is_finite() && out.energy.is_finite()) {
        return Err(Error::NonFinite {
            location: "error norms".into(),
        });
    }
    Ok(out)
}

/// One solved mesh level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    pub l2_error: f64,
    pub energy_error: f64,
    /// Rate against the previous level; absent on the first.
    pub eoc_l2: Option<f64>,
    pub eoc_energy: Option<f64>,
    pub alpha: f64,
    pub iterations: usize,
    pub relative_residual: f64,
    pub flagged_elements: usize,
}

/// Errors and rates over a sequence of uniformly refined meshes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub degree: usize,
    pub mode: PenaltyMode,
    pub tau: String,
    /// Largest diffusion coefficient on the coarsest mesh.
    pub epsilon: f64,
    pub levels: Vec<LevelResult>,
    /// Set when a level failed; the levels before it are kept.
    pub failure: Option<String>,
}

/// `log(e_0 / e_1) / log(h_0 / h_1)`.
pub fn eoc(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

struct Solved<'m, T: Real> {
    space: DGSpace<'m, T>,
    partition: Partition<T>,
    stab: Stabilization<T>,
    dofs: Vec<T>,
    iterations: usize,
    relative_residual: f64,
    flagged: usize,
}

fn solve_on<'m, T: Real>(mesh: &'m Mesh<T>, problem: &ProblemData<T>, cfg: &StudyConfig) -> Result<Solved<'m, T>> {
    let space = DGSpace::new(mesh, cfg.degree)?;
    let partition = classify(mesh, problem)?;
    let stab = Stabilization::new(&space, problem, &partition, &cfg.stabilization)?;
    let sys = assemble_with(&space, problem, &partition, cfg.mode, &stab, Terms::ALL)?;
    let report = solve(&sys.matrix, &sys.rhs, &cfg.solver)?;
    Ok(Solved {
        space,
        partition,
        stab,
        dofs: report.solution,
        iterations: report.iterations,
        relative_residual: report.relative_residual.as_f64(),
        flagged: sys.flagged_elements.len(),
    })
}

fn unit_mesh<T: Real>(problem: &ProblemData<T>, n: usize) -> Result<Mesh<T>> {
    build_structured_triangular(n, problem.domain)
}

fn run_level<T: Real>(problem: &ProblemData<T>, n: usize, cfg: &StudyConfig) -> Result<(LevelResult, f64)> {
    let mesh = unit_mesh(problem, n)?;
    let s = solve_on(&mesh, problem, cfg)?;
    let err = error_norms(&s.space, problem, &s.partition, cfg.mode, &s.stab, &s.dofs)?;
    let eps = s.partition.a_max_element.iter().fold(0.0f64, |m, a| m.max(a.as_f64()));
    Ok((
        LevelResult {
            n,
            h: 1.0 / n as f64,
            dofs: s.space.num_dofs(),
            l2_error: err.l2,
            energy_error: err.energy,
            eoc_l2: None,
            eoc_energy: None,
            alpha: s.stab.alpha.as_f64(),
            iterations: s.iterations,
            relative_residual: s.relative_residual,
            flagged_elements: s.flagged,
        },
        eps,
    ))
}

/// Solves on `n × n` meshes for each `n` in `levels` (strictly increasing)
/// and measures errors against the exact solution.
pub fn run_convergence<T: Real>(problem: &ProblemData<T>, levels: &[usize], cfg: &StudyConfig) -> Result<ConvergenceReport> {
    if problem.exact.is_none() {
        return Err(Error::InvalidArgument(format!("problem `{}` has no exact solution", problem.name)));
    }
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) || levels[0] == 0 {
        return Err(Error::InvalidArgument(format!("levels must be positive and strictly increasing, got {levels:?}")));
    }
    cfg.solver.validate()?;
    let results: Vec<Result<(LevelResult, f64)>> = levels.par_iter().map(|&n| run_level(problem, n, cfg)).collect();
    let mut report = ConvergenceReport {
        problem: problem.name.clone(),
        degree: cfg.degree,
        mode: cfg.mode,
        tau: cfg.stabilization.tau.label().to_string(),
        epsilon: 0.0,
        levels: Vec::new(),
        failure: None,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((mut level, eps)) => {
                if i == 0 {
                    report.epsilon = eps;
                }
                if let Some(prev) = report.levels.last() {
                    level.eoc_l2 = Some(eoc(prev.l2_error, level.l2_error, prev.h, level.h));
                    level.eoc_energy = Some(eoc(prev.energy_error, level.energy_error, prev.h, level.h));
                }
                log::info!(
                    "n = {:>4}  dofs = {:>7}  L2 = {:.4e}  energy = {:.4e}",
                    level.n,
                    level.dofs,
                    level.l2_error,
                    level.energy_error
                );
                report.levels.push(level);
            }
            Err(e) => {
                log::error!("level n = {} failed: {e}", levels[i]);
                report.failure = Some(format!("n = {}: {e}", levels[i]));
                break;
            }
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl ConvergenceReport {
    pub const CSV_HEADER: &'static str =
        "problem,degree,mode,tau,n,h,dofs,alpha,l2_error,energy_error,eoc_l2,eoc_energy,iterations,relative_residual";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for l in &self.levels {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.10e},{},{:.10e},{:.10e},{:.10e},{},{},{},{:.3e}",
                csv_field(&self.problem),
                self.degree,
                self.mode.label(),
                self.tau,
                l.n,
                l.h,
                l.dofs,
                l.alpha,
                l.l2_error,
                l.energy_error,
                opt(l.eoc_l2),
                opt(l.eoc_energy),
                l.iterations,
                l.relative_residual
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Energy-norm rate between the two finest levels.
    pub fn final_eoc(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.eoc_energy)
    }

    pub fn final_eoc_l2(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.eoc_l2)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// How far the discrete projection of the exact solution is from solving
/// the discrete problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub problem: String,
    pub degree: usize,
    pub n: usize,
    pub mode: PenaltyMode,
    /// `max_i |(A πc − b)_i| / max_i |b_i|`.
    pub residual: f64,
}

/// Applies the operator to the L2 projection of the exact solution on the
/// structured `n × n` mesh.
pub fn run_consistency<T: Real>(problem: &ProblemData<T>, n: usize, cfg: &StudyConfig) -> Result<ConsistencyReport> {
    let mesh = unit_mesh(problem, n)?;
    let mut r = run_consistency_on(problem, &mesh, cfg)?;
    r.n = n;
    Ok(r)
}

/// As [`run_consistency`] on a given mesh; `n` is reported as the number
/// of elements.
pub fn run_consistency_on<T: Real>(problem: &ProblemData<T>, mesh: &Mesh<T>, cfg: &StudyConfig) -> Result<ConsistencyReport> {
    let space = DGSpace::new(mesh, cfg.degree)?;
    let partition = classify(mesh, problem)?;
    let sys = assemble(&space, problem, &partition, cfg.mode, &cfg.stabilization)?;
    let pc = space.project_exact(problem)?;
    let r: Vec<T> = sys.matrix.matvec(&pc).iter().zip(&sys.rhs).map(|(&a, &b)| a - b).collect();
    let scale = max_abs(&sys.rhs);
    let residual = if scale > T::zero() { max_abs(&r) / scale } else { max_abs(&r) };
    Ok(ConsistencyReport {
        problem: problem.name.clone(),
        degree: cfg.degree,
        n: mesh.num_elements(),
        mode: cfg.mode,
        residual: residual.as_f64(),
    })
}

impl ConsistencyReport {
    pub const CSV_HEADER: &'static str = "problem,degree,n,mode,residual";

    pub fn to_csv(reports: &[ConsistencyReport]) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in reports {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.6e}",
                csv_field(&r.problem),
                r.degree,
                r.n,
                r.mode.label(),
                r.residual
            );
        }
        s
    }
}

/// Mean of `left − right` over the facets between regions 0 and 1, weighted
/// by length, for the discrete solution and for the exact one.
fn interface_jumps<T: Real>(space: &DGSpace<'_, T>, problem: &ProblemData<T>, regions: &[usize], dofs: &[T]) -> (f64, f64) {
    let mesh = space.mesh;
    let exact = problem.exact.as_ref();
    let (mut disc, mut ex, mut len) = (T::zero(), T::zero(), T::zero());
    for f in 0..mesh.num_facets() {
        let geom = &mesh.facets[f];
        let Some(k2) = geom.k2 else { continue };
        let (r1, r2) = (regions[geom.k1], regions[k2]);
        if r1 == r2 {
            continue;
        }
        let (kl, kr, rl, rr) = if r1 < r2 { (geom.k1, k2, r1, r2) } else { (k2, geom.k1, r2, r1) };
        let (pts, wts) = space.facet_points(f);
        for (&x, &w) in pts.iter().zip(&wts) {
            disc += w * (space.eval_function(kl, dofs, x).value - space.eval_function(kr, dofs, x).value);
            if let Some(e) = exact {
                ex += w * (e.value.branch(rl)(x) - e.value.branch(rr)(x));
            }
            len += w;
        }
    }
    if len > T::zero() {
        ((disc / len).as_f64(), (ex / len).as_f64())
    } else {
        (0.0, 0.0)
    }
}

/// Outcome of one penalty mode on the interface problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeOutcome {
    pub mode: PenaltyMode,
    pub mean_jump: f64,
    /// `mean_jump / exact_jump`.
    pub jump_ratio: f64,
    pub l2_error: f64,
    /// L2 error on the diffusive (left) side.
    pub l2_diffusive: f64,
    /// L2 error on the hyperbolic (right) side.
    pub l2_hyperbolic: f64,
    pub energy_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyComparison {
    pub n: usize,
    pub degree: usize,
    pub exact_jump: f64,
    pub outcomes: Vec<ModeOutcome>,
}

/// Solves `degenerate_interface` with the minimal and the legacy penalty.
pub fn compare_penalty_modes(n: usize, degree: usize, stab: &StabilizationConfig, solver: &SolverConfig) -> Result<PenaltyComparison> {
    let problem: ProblemData<f64> = builtin_problem("degenerate_interface")?;
    let mesh = unit_mesh(&problem, n)?;
    let mut outcomes = Vec::new();
    let mut exact_jump = 0.0;
    for mode in [PenaltyMode::MinimalDfd, PenaltyMode::LegacyAll] {
        let cfg = StudyConfig {
            degree,
            mode,
            stabilization: *stab,
            solver: *solver,
        };
        let s = solve_on(&mesh, &problem, &cfg)?;
        let err = error_norms(&s.space, &problem, &s.partition, mode, &s.stab, &s.dofs)?;
        let (jump, exact) = interface_jumps(&s.space, &problem, &s.stab.regions, &s.dofs);
        exact_jump = exact;
        outcomes.push(ModeOutcome {
            mode,
            mean_jump: jump,
            jump_ratio: if exact != 0.0 { jump / exact } else { f64::NAN },
            l2_error: err.l2,
            l2_diffusive: err.l2_by_region.first().copied().unwrap_or(0.0),
            l2_hyperbolic: err.l2_by_region.get(1).copied().unwrap_or(0.0),
            energy_error: err.energy,
        });
    }
    Ok(PenaltyComparison {
        n,
        degree,
        exact_jump,
        outcomes,
    })
}

impl PenaltyComparison {
    pub const CSV_HEADER: &'static str =
        "mode,n,degree,exact_jump,mean_jump,jump_ratio,l2_error,l2_diffusive,l2_hyperbolic,energy_error";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for o in &self.outcomes {
            let _ = writeln!(
                s,
                "{},{},{},{:.10e},{:.10e},{:.6},{:.10e},{:.10e},{:.10e},{:.10e}",
                o.mode.label(),
                self.n,
                self.degree,
                self.exact_jump,
                o.mean_jump,
                o.jump_ratio,
                o.l2_error,
                o.l2_diffusive,
                o.l2_hyperbolic,
                o.energy_error
            );
        }
        s
    }

    pub fn outcome(&self, mode: PenaltyMode) -> Option<&ModeOutcome> {
        self.outcomes.iter().find(|o| o.mode == mode)
    }
}

/// One identity checked over random trial vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub problem: String,
    pub trials: usize,
    /// Largest residual relative to the term scale.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// The check runs outside its hypotheses; failure is informative only.
    pub expected_fail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySummary {
    pub seed: u64,
    pub degree: usize,
    pub n: usize,
    pub checks: Vec<IdentityCheck>,
}

impl IdentitySummary {
    /// All checks inside their hypotheses passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.expected_fail)
    }

    pub const CSV_HEADER: &'static str = "check,problem,degree,n,trials,worst,tolerance,status";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        s.push_str(&self.csv_rows());
        s
    }

    /// The rows of [`to_csv`](Self::to_csv) without the header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = match (c.passed, c.expected_fail) {
                (true, _) => "pass",
                (false, true) => "expected-fail",
                (false, false) => "FAIL",
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.3e},{:.1e},{}",
                c.name,
                csv_field(&c.problem),
                self.degree,
                self.n,
                c.trials,
                c.worst,
                c.tolerance,
                status
            );
        }
        s
    }
}

const IDENTITY_TOL: f64 = 1e-10;
const ABOVE_BOUND_FACTOR: f64 = 10.0;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn zero_exact() -> ExactSolution<f64> {
    ExactSolution {
        value: ScalarField::constant(0.0),
        gradient: VectorField::constant([0.0, 0.0]),
        hessian: TensorField::constant([[0.0; 2]; 2]),
    }
}

/// A problem with velocity `u`, used only for its operator.
fn velocity_problem(name: &str, a: f64, u: VectorField<f64>, div_u: f64) -> ProblemData<f64> {
    manufactured(
        name,
        Rectangle::unit(),
        None,
        TensorField::isotropic(a),
        u,
        ScalarField::constant(div_u),
        ScalarField::constant(1.0),
        zero_exact(),
        Arc::new(|_, _| true),
    )
}

/// Problems with affine velocity fields.
pub fn affine_velocity_problems() -> Vec<ProblemData<f64>> {
    vec![
        velocity_problem("u=(0,0)", 0.0, VectorField::constant([0.0, 0.0]), 0.0),
        velocity_problem("u=(1,2)", 0.0, VectorField::constant([1.0, 2.0]), 0.0),
        velocity_problem("u=(x,-y)", 0.0, VectorField::new(|x: Point<f64>| [x[0], -x[1]]), 0.0),
        velocity_problem("u=(1+y,0.5-x)", 0.0, VectorField::new(|x: Point<f64>| [1.0 + x[1], 0.5 - x[0]]), 0.0),
        velocity_problem("u=(x,y)", 1e-3, VectorField::new(|x: Point<f64>| [x[0], x[1]]), 2.0),
    ]
}

/// Builtins whose coefficients are polynomial.
pub fn polynomial_builtins(degree: usize) -> Result<Vec<ProblemData<f64>>> {
    [
        "pure_diffusion".to_string(),
        "advection_dominated".to_string(),
        "degenerate_interface".to_string(),
        format!("polynomial_exactness({degree})"),
    ]
    .iter()
    .map(|name| builtin_problem(name))
    .collect()
}

fn check_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

/// `a_h(v, v)` against the sum of energy-norm terms, minimal penalty.
pub fn norm_identity_check(problem: &ProblemData<f64>, mesh: &Mesh<f64>, degree: usize, trials: usize, seed: u64) -> Result<IdentityCheck> {
    let space = DGSpace::new(mesh, degree)?;
    let partition = classify(mesh, problem)?;
    let stab = Stabilization::new(&space, problem, &partition, &StabilizationConfig::default())?;
    let mode = PenaltyMode::MinimalDfd;
    let sys = assemble_with(&space, problem, &partition, mode, &stab, Terms::ALL)?;
    let quad = NormQuadrature::assembly(&space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let v = random_vec(&mut rng, space.num_dofs());
        let f = |k: usize, x: Point<f64>| space.eval_function(k, &v, x);
        let terms = energy_norm_terms(&space, problem, &partition, mode, &stab, &quad, &f);
        let lhs = sys.matrix.bilinear(&v, &v);
        worst = worst.max((lhs - terms.total()).abs() / terms.magnitude().max(f64::MIN_POSITIVE));
    }
    Ok(IdentityCheck {
        name: "norm_identity".into(),
        problem: problem.name.clone(),
        trials,
        worst,
        tolerance: IDENTITY_TOL,
        passed: worst <= IDENTITY_TOL,
        expected_fail: false,
    })
}

/// Advection coercivity and duality over random pairs.
pub fn advection_identity_checks(problem: &ProblemData<f64>, mesh: &Mesh<f64>, degree: usize, trials: usize, seed: u64) -> Result<[IdentityCheck; 2]> {
    let space = DGSpace::new(mesh, degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut wc, mut wd) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let v = random_vec(&mut rng, space.num_dofs());
        let w = random_vec(&mut rng, space.num_dofs());
        let r = advection_identity_check(&space, problem, &v, &w);
        let rel = |res: f64, scale: f64| if scale > 0.0 { res / scale } else { res };
        wc = wc.max(rel(r.coercivity, r.coercivity_scale));
        wd = wd.max(rel(r.duality, r.duality_scale));
    }
    let make = |name: &str, worst: f64| IdentityCheck {
        name: name.into(),
        problem: problem.name.clone(),
        trials,
        worst,
        tolerance: IDENTITY_TOL,
        passed: worst <= IDENTITY_TOL,
        expected_fail: false,
    };
    Ok([make("advection_coercivity", wc), make("advection_duality", wd)])
}

/// `a_h(v, v) ≥ ½‖τ^{1/2}(u·∇v + ½ div u v)‖²` with `α = factor · bound`.
/// The worst value reported is the largest relative shortfall
/// `(½‖τ^{1/2}a(v)‖² − a_h(v, v)) / scale`, negative when the bound holds.
pub fn supg_coercivity_check(
    problem: &ProblemData<f64>,
    mesh: &Mesh<f64>,
    degree: usize,
    alpha_factor: f64,
    trials: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let space = DGSpace::new(mesh, degree)?;
    let partition = classify(mesh, problem)?;
    let base = Stabilization::new(&space, problem, &partition, &StabilizationConfig::default())?;
    let cfg = StabilizationConfig {
        alpha: Some(alpha_factor * alpha_bound(base.c_inv)),
        c_inv: Some(base.c_inv),
        ..StabilizationConfig::default()
    };
    let stab = Stabilization::new(&space, problem, &partition, &cfg)?;
    let mode = PenaltyMode::MinimalDfd;
    let sys = assemble_with(&space, problem, &partition, mode, &stab, Terms::ALL)?;
    let quad = NormQuadrature::assembly(&space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let v = random_vec(&mut rng, space.num_dofs());
        let f = |k: usize, x: Point<f64>| space.eval_function(k, &v, x);
        let terms = energy_norm_terms(&space, problem, &partition, mode, &stab, &quad, &f);
        let lhs = sys.matrix.bilinear(&v, &v);
        let shortfall = 0.5 * terms.supg_advection - lhs;
        let scale = terms.magnitude() + terms.supg_advection;
        worst = worst.max(shortfall / scale.max(f64::MIN_POSITIVE));
    }
    let name = if alpha_factor < 1.0 { "supg_coercivity" } else { "supg_coercivity_above_bound" };
    Ok(IdentityCheck {
        name: name.into(),
        problem: problem.name.clone(),
        trials,
        worst,
        tolerance: IDENTITY_TOL,
        passed: worst <= IDENTITY_TOL,
        expected_fail: alpha_factor >= 1.0,
    })
}

/// Runs every identity check on an `n × n` mesh with seeded random vectors.
pub fn run_identity_suite(seed: u64, trials: usize, degree: usize, n: usize) -> Result<IdentitySummary> {
    let mesh = build_structured_triangular(n, Rectangle::unit())?;
    let builtins = polynomial_builtins(degree)?;
    let affine = affine_velocity_problems();
    let mut checks = Vec::new();
    let mut index = 0;
    let mut next_seed = || {
        index += 1;
        check_seed(seed, index)
    };
    for p in &builtins {
        checks.push(norm_identity_check(p, &mesh, degree, trials, next_seed())?);
    }
    for p in &affine {
        checks.extend(advection_identity_checks(p, &mesh, degree, trials, next_seed())?);
    }
    for p in builtins.iter().chain(&affine) {
        checks.push(supg_coercivity_check(p, &mesh, degree, 0.5, trials, next_seed())?);
    }
    for p in &builtins {
        checks.push(supg_coercivity_check(p, &mesh, degree, ABOVE_BOUND_FACTOR, trials, next_seed())?);
    }
    Ok(IdentitySummary { seed, degree, n, checks })
}

/// Per-facet classification table.
pub fn partition_report_csv<T: Real>(mesh: &Mesh<T>, partition: &Partition<T>) -> String {
    let mut s = String::from("facet,midpoint_x,midpoint_y,class,a_lambda,max_abs_un,dominance\n");
    for (f, (geom, info)) in mesh.facets.iter().zip(&partition.facets).enumerate() {
        let _ = writeln!(
            s,
            "{},{:.10},{:.10},{},{},{:.6e},{}",
            f,
            geom.midpoint[0].as_f64(),
            geom.midpoint[1].as_f64(),
            info.class.label(),
            info.scalars.a_lambda.map_or_else(String::new, |a| format!("{:.6e}", a.as_f64())),
            info.scalars.max_abs_un.as_f64(),
            info.dominance.map_or("", |d| d.label())
        );
    }
    s
}
