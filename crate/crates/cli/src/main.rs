use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use ncfdg_cli::commands::{self, Assertion};
use ncfdg_cli::config::Settings;

/// DG solver and verification harness for advection-diffusion-reaction
/// problems with vanishing diffusion.
///
/// Exit status: 0 when every assertion passes, 1 when one fails, 2 on error.
#[derive(Debug, Parser)]
#[command(name = "ncfdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key=value settings file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Builtin name (`pure_diffusion`, `advection_dominated[(eps)]`,
    /// `degenerate_interface`, `polynomial_exactness(l)`) or `custom`.
    #[arg(long, global = true)]
    problem: Option<String>,

    /// Polynomial degree.
    #[arg(long, global = true)]
    degree: Option<String>,

    /// Comma-separated mesh sizes n (n x n squares, two triangles each).
    #[arg(long, global = true)]
    levels: Option<String>,

    /// Penalty set: minimal, full-df or legacy-all.
    #[arg(long, global = true)]
    mode: Option<String>,

    /// SUPG scaling; defaults to a quarter of the coercivity bound.
    #[arg(long, global = true)]
    alpha: Option<String>,

    /// Stabilization parameter: pointwise or dk.
    #[arg(long, global = true)]
    tau: Option<String>,

    /// Diffusion of advection_dominated, and `eps` in expressions.
    #[arg(long, global = true)]
    epsilon: Option<String>,

    /// Linear solver: direct or krylov.
    #[arg(long, global = true)]
    solver: Option<String>,

    /// Relative residual tolerance of the solver.
    #[arg(long, global = true)]
    solver_tol: Option<String>,

    /// Seed for random trial vectors.
    #[arg(long, global = true)]
    seed: Option<String>,

    /// Random trials per identity.
    #[arg(long, global = true)]
    trials: Option<String>,

    /// Directory for CSV, JSON, mesh and matrix files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Mesh JSON `{vertices, elements}` to use instead of --levels.
    #[arg(long, global = true)]
    mesh: Option<PathBuf>,

    /// Write each mesh as JSON (mesh-info).
    #[arg(long, global = true)]
    export_mesh: bool,

    /// Write the assembled matrix (Matrix Market) and load vector
    /// (convergence, consistency).
    #[arg(long, global = true)]
    dump_matrix: bool,

    /// Expected final energy EOC (convergence).
    #[arg(long, global = true)]
    expect_eoc: Option<String>,

    /// Allowed deviation from --expect-eoc.
    #[arg(long, global = true)]
    eoc_tol: Option<String>,

    /// Largest acceptable consistency residual.
    #[arg(long, global = true)]
    max_residual: Option<String>,

    /// Allowed relative deviation of the minimal-mode interface jump.
    #[arg(long, global = true)]
    jump_tol: Option<String>,

    /// Expression for the custom problem, `name=expression`; repeatable.
    #[arg(long = "expr", global = true, value_name = "NAME=EXPR")]
    exprs: Vec<String>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mesh statistics and problem-assumption checks.
    MeshInfo,
    /// Per-facet classification table.
    PartitionReport,
    /// Errors and rates under refinement.
    Convergence,
    /// Residual of the projected exact solution.
    Consistency,
    /// Norm, advection and SUPG identities on random vectors.
    Identities,
    /// Minimal against legacy penalties on the interface problem.
    ComparePenalties,
}

impl Cli {
    fn settings(&self) -> ncfdg::Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        let flags = [
            ("problem", &self.problem),
            ("degree", &self.degree),
            ("levels", &self.levels),
            ("mode", &self.mode),
            ("alpha", &self.alpha),
            ("tau", &self.tau),
            ("epsilon", &self.epsilon),
            ("solver", &self.solver),
            ("solver-tol", &self.solver_tol),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("expect-eoc", &self.expect_eoc),
            ("eoc-tol", &self.eoc_tol),
            ("max-residual", &self.max_residual),
            ("jump-tol", &self.jump_tol),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                s.set(key, v)?;
            }
        }
        if let Some(p) = &self.out {
            s.out = Some(p.clone());
        }
        if let Some(p) = &self.mesh {
            s.mesh = Some(p.clone());
        }
        s.export_mesh |= self.export_mesh;
        s.dump_matrix |= self.dump_matrix;
        for e in &self.exprs {
            let (name, expr) = e
                .split_once('=')
                .ok_or_else(|| ncfdg::Error::InvalidArgument(format!("--expr wants NAME=EXPR, got `{e}`")))?;
            s.set(&format!("expr.{}", name.trim()), expr)?;
        }
        Ok(s)
    }
}

fn run(cli: &Cli) -> ncfdg::Result<Vec<Assertion>> {
    let s = cli.settings()?;
    log::debug!("{s:?}");
    match cli.command {
        Command::MeshInfo => commands::mesh_info(&s),
        Command::PartitionReport => commands::partition_report(&s),
        Command::Convergence => commands::convergence(&s),
        Command::Consistency => commands::consistency(&s),
        Command::Identities => commands::identities(&s),
        Command::ComparePenalties => commands::compare_penalties(&s),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let start = std::time::Instant::now();
    match run(&cli) {
        Ok(checks) => {
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                if c.detail.is_empty() {
                    eprintln!("{status} {}", c.name);
                } else {
                    eprintln!("{status} {}: {}", c.name, c.detail);
                }
            }
            log::info!("finished in {:.2?}", start.elapsed());
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
