//! Subcommand implementations. Each returns the list of assertions it made.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ncfdg::assembly::{assemble, PenaltyMode};
use ncfdg::harness::{
    compare_penalty_modes, partition_report_csv, run_consistency_on, run_convergence, run_identity_suite,
    ConsistencyReport, IdentitySummary,
};
use ncfdg::mesh::{build_structured_triangular, mesh_quality_report};
use ncfdg::partition::classify;
use ncfdg::problem::builtin::{Builtin, DEFAULT_EPSILON};
use ncfdg::problem::validate_problem;
use ncfdg::sparse::write_vector;
use ncfdg::{DGSpace, Error, Mesh, ProblemData, Result};

use crate::config::Settings;
use crate::expr::custom_problem;

/// One checked condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Resolves `--problem`, applying `--epsilon` where it has a meaning.
pub fn resolve_problem(s: &Settings) -> Result<ProblemData> {
    if s.problem.trim() == "custom" {
        return custom_problem(&s.exprs, s.epsilon.unwrap_or(DEFAULT_EPSILON));
    }
    if !s.exprs.is_empty() {
        log::warn!("expressions are only used with --problem custom; ignoring them");
    }
    let mut builtin: Builtin = s.problem.parse()?;
    if let Some(e) = s.epsilon {
        match &mut builtin {
            Builtin::AdvectionDominated { epsilon } => *epsilon = e,
            _ => log::warn!("--epsilon has no effect on `{}`", s.problem),
        }
    }
    Ok(builtin.problem())
}

/// The meshes a command works on: the imported one, or one per level.
pub fn meshes(s: &Settings, problem: &ProblemData) -> Result<Vec<(String, Mesh)>> {
    match &s.mesh {
        Some(path) => {
            let mesh = Mesh::from_json(&fs::read_to_string(path)?)?;
            let label = path.file_stem().map_or("mesh".into(), |t| t.to_string_lossy().into_owned());
            Ok(vec![(label, mesh)])
        }
        None => s
            .levels
            .iter()
            .map(|&n| Ok((format!("n{n}"), build_structured_triangular(n, problem.domain)?)))
            .collect(),
    }
}

/// Where reports go: files under `--out`, or standard output.
pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
        })
    }

    fn require_dir(&self, what: &str) -> Result<&Path> {
        self.dir
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("{what} needs --out")))
    }

    /// Writes `content` to `name` under the output directory, or prints it.
    pub fn emit(&self, name: &str, content: &str) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                fs::write(&path, content)?;
                println!("wrote {}", path.display());
            }
            None => print!("{content}"),
        }
        Ok(())
    }

    /// Writes only when an output directory is set.
    pub fn save(&self, name: &str, content: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, content)?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

/// Joins CSV documents that share a header.
fn concat_csv(docs: &[String]) -> String {
    let mut out = String::new();
    for (i, d) in docs.iter().enumerate() {
        let body = if i == 0 { d.as_str() } else { d.split_once('\n').map_or("", |(_, rest)| rest) };
        out.push_str(body);
    }
    out
}

fn dump_systems(s: &Settings, problem: &ProblemData, meshes: &[(String, Mesh)], out: &Output) -> Result<()> {
    let dir = out.require_dir("--dump-matrix")?;
    for (label, mesh) in meshes {
        let space = DGSpace::new(mesh, s.degree)?;
        let partition = classify(mesh, problem)?;
        let sys = assemble(&space, problem, &partition, s.mode, &s.stabilization())?;
        let mtx = dir.join(format!("matrix_{label}.mtx"));
        sys.matrix.write_matrix_market(std::io::BufWriter::new(fs::File::create(&mtx)?))?;
        let rhs = dir.join(format!("rhs_{label}.txt"));
        write_vector(&sys.rhs, std::io::BufWriter::new(fs::File::create(&rhs)?))?;
        println!("wrote {} and {}", mtx.display(), rhs.display());
    }
    Ok(())
}

pub fn mesh_info(s: &Settings) -> Result<Vec<Assertion>> {
    let problem = resolve_problem(s)?;
    let out = Output::new(s.out.as_deref())?;
    let mut csv = String::from(
        "mesh,elements,vertices,facets,interior_facets,boundary_facets,h,area,max_shape,max_nonconformity,problem_violations\n",
    );
    let mut checks = Vec::new();
    for (label, mesh) in meshes(s, &problem)? {
        let q = mesh_quality_report(&mesh);
        let v = validate_problem(&problem, &mesh);
        let _ = writeln!(
            csv,
            "{label},{},{},{},{},{},{:.10e},{:.10e},{:.6},{:.6},{}",
            mesh.num_elements(),
            mesh.vertices.len(),
            mesh.num_facets(),
            mesh.num_interior_facets(),
            mesh.num_boundary_facets(),
            mesh.h(),
            mesh.total_area(),
            q.max_shape,
            q.max_nonconformity,
            v.total_violations
        );
        for violation in &v.violations {
            log::warn!(
                "{label}: {:?} on element {} at ({:.4}, {:.4}): {:.3e}",
                violation.kind,
                violation.element,
                violation.point[0],
                violation.point[1],
                violation.value
            );
        }
        checks.push(Assertion::new(
            format!("{label}: problem assumptions"),
            v.is_valid(),
            format!("{} violations in {} samples", v.total_violations, v.samples),
        ));
        if s.export_mesh {
            let dir = out.require_dir("--export-mesh")?;
            let path = dir.join(format!("mesh_{label}.json"));
            fs::write(&path, mesh.to_json()?)?;
            println!("wrote {}", path.display());
        }
    }
    out.emit("mesh_info.csv", &csv)?;
    Ok(checks)
}

pub fn partition_report(s: &Settings) -> Result<Vec<Assertion>> {
    let problem = resolve_problem(s)?;
    let out = Output::new(s.out.as_deref())?;
    let mut checks = Vec::new();
    for (label, mesh) in meshes(s, &problem)? {
        let partition = classify(&mesh, &problem)?;
        let c = partition.counts();
        eprintln!(
            "{label}: interior DfDf_dfd {} DfDf_add {} AdDf_plus {} AdDf_minus {} AdAd {}; \
             boundary DfD {} ({} inflow) DfN_minus {} DfN_plus {} Ad_minus {} Ad_plus {}",
            c.dfdf_dfd,
            c.dfdf_add,
            c.addf_plus,
            c.addf_minus,
            c.adad,
            c.dfd,
            c.dfd_inflow,
            c.dfn_minus,
            c.dfn_plus,
            c.ad_minus,
            c.ad_plus
        );
        checks.push(Assertion::new(
            format!("{label}: every facet classified"),
            c.interior() == mesh.num_interior_facets() && c.boundary() == mesh.num_boundary_facets(),
            format!("{} interior, {} boundary", c.interior(), c.boundary()),
        ));
        out.emit(&format!("partition_{label}.csv"), &partition_report_csv(&mesh, &partition))?;
    }
    Ok(checks)
}

pub fn convergence(s: &Settings) -> Result<Vec<Assertion>> {
    if s.mesh.is_some() {
        return Err(Error::InvalidArgument("convergence refines structured meshes; drop --mesh".into()));
    }
    let problem = resolve_problem(s)?;
    let out = Output::new(s.out.as_deref())?;
    if s.dump_matrix {
        dump_systems(s, &problem, &meshes(s, &problem)?, &out)?;
    }
    let report = run_convergence(&problem, &s.levels, &s.study())?;
    out.emit("convergence.csv", &report.to_csv())?;
    out.save("convergence.json", &report.to_json()?)?;
    let mut checks = vec![Assertion::new(
        "all levels solved",
        report.failure.is_none(),
        report.failure.clone().unwrap_or_else(|| format!("{} levels", report.levels.len())),
    )];
    let decreasing = report.levels.windows(2).all(|w| w[1].energy_error < w[0].energy_error);
    checks.push(Assertion::new("energy error decreases", decreasing, ""));
    if let Some(expected) = s.expect_eoc {
        let rate = report.final_eoc();
        checks.push(Assertion::new(
            "final energy EOC",
            rate.is_some_and(|r| (r - expected).abs() <= s.eoc_tol),
            format!("{} vs {expected} ± {}", rate.map_or("none".into(), |r| format!("{r:.4}")), s.eoc_tol),
        ));
    }
    Ok(checks)
}

pub fn consistency(s: &Settings) -> Result<Vec<Assertion>> {
    let problem = resolve_problem(s)?;
    let out = Output::new(s.out.as_deref())?;
    let meshes = meshes(s, &problem)?;
    if s.dump_matrix {
        dump_systems(s, &problem, &meshes, &out)?;
    }
    let cfg = s.study();
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    for (label, mesh) in &meshes {
        let mut r = run_consistency_on(&problem, mesh, &cfg)?;
        if let Some(n) = label.strip_prefix('n').and_then(|n| n.parse().ok()) {
            r.n = n;
        }
        let ok = r.residual.is_finite() && s.max_residual.is_none_or(|m| r.residual <= m);
        let limit = s.max_residual.map_or(String::new(), |m| format!(" (limit {m:e})"));
        checks.push(Assertion::new(format!("{label}: residual"), ok, format!("{:.3e}{limit}", r.residual)));
        reports.push(r);
    }
    out.emit("consistency.csv", &ConsistencyReport::to_csv(&reports))?;
    out.save("consistency.json", &serde_json::to_string_pretty(&reports)?)?;
    Ok(checks)
}

pub fn identities(s: &Settings) -> Result<Vec<Assertion>> {
    let out = Output::new(s.out.as_deref())?;
    let mut summaries: Vec<IdentitySummary> = Vec::new();
    let mut checks = Vec::new();
    for &n in &s.levels {
        let summary = run_identity_suite(s.seed, s.trials, s.degree, n)?;
        for c in &summary.checks {
            if !c.passed && c.expected_fail {
                log::info!("n{n}: {} on {} fails outside its hypotheses", c.name, c.problem);
            }
        }
        let failing: Vec<String> = summary
            .checks
            .iter()
            .filter(|c| !c.passed && !c.expected_fail)
            .map(|c| format!("{} ({})", c.name, c.problem))
            .collect();
        checks.push(Assertion::new(
            format!("n{n}: identities"),
            summary.all_passed(),
            if failing.is_empty() {
                format!("{} checks", summary.checks.len())
            } else {
                format!("failing: {}", failing.join(", "))
            },
        ));
        summaries.push(summary);
    }
    let csv: Vec<String> = summaries.iter().map(IdentitySummary::to_csv).collect();
    out.emit("identities.csv", &concat_csv(&csv))?;
    out.save("identities.json", &serde_json::to_string_pretty(&summaries)?)?;
    Ok(checks)
}

pub fn compare_penalties(s: &Settings) -> Result<Vec<Assertion>> {
    if s.problem != Settings::default().problem && s.problem != "degenerate_interface" {
        log::warn!("compare-penalties always runs degenerate_interface; ignoring --problem");
    }
    let out = Output::new(s.out.as_deref())?;
    let mut docs = Vec::new();
    let mut all = Vec::new();
    let mut checks = Vec::new();
    for &n in &s.levels {
        let c = compare_penalty_modes(n, s.degree, &s.stabilization(), &s.solver())?;
        let (Some(min), Some(legacy)) = (c.outcome(PenaltyMode::MinimalDfd), c.outcome(PenaltyMode::LegacyAll)) else {
            return Err(Error::Logic("comparison lacks a mode".into()));
        };
        checks.push(Assertion::new(
            format!("n{n}: minimal keeps the jump"),
            (min.jump_ratio - 1.0).abs() <= s.jump_tol,
            format!("{:.4} of exact {:.4} (tolerance {})", min.mean_jump, c.exact_jump, s.jump_tol),
        ));
        checks.push(Assertion::new(
            format!("n{n}: legacy smears the jump"),
            legacy.mean_jump.abs() < min.mean_jump.abs(),
            format!("{:.4}", legacy.mean_jump),
        ));
        checks.push(Assertion::new(
            format!("n{n}: minimal is more accurate on the hyperbolic side"),
            min.l2_hyperbolic < legacy.l2_hyperbolic,
            format!("{:.3e} vs {:.3e}", min.l2_hyperbolic, legacy.l2_hyperbolic),
        ));
        docs.push(c.to_csv());
        all.push(c);
    }
    out.emit("compare_penalties.csv", &concat_csv(&docs))?;
    out.save("compare_penalties.json", &serde_json::to_string_pretty(&all)?)?;
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_documents_share_one_header() {
        let joined = concat_csv(&["h\n1\n".into(), "h\n2\n".into()]);
        assert_eq!(joined, "h\n1\n2\n");
    }

    #[test]
    fn epsilon_reaches_the_advection_problem() {
        let mut s = Settings::default();
        s.problem = "advection_dominated".into();
        s.epsilon = Some(0.5);
        let p = resolve_problem(&s).unwrap();
        assert_eq!(p.a_at([0.2, 0.2], 0)[0][0], 0.5);
        s.problem = "polynomial_exactness(2)".into();
        assert!(resolve_problem(&s).is_ok());
        s.problem = "no_such_problem".into();
        assert!(resolve_problem(&s).is_err());
    }
}
