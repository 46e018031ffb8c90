//! Run settings from a key=value file and command-line overrides.
//!
//! File grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! expr.<name> = <expression>
//! ```
//!
//! Keys are the long flag names (`-` and `_` are interchangeable). Blank
//! lines and lines starting with `#` are ignored. Everything after the first
//! `=` is the value. Flags given on the command line replace file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ncfdg::assembly::{PenaltyMode, StabilizationConfig, TauVariant};
use ncfdg::harness::StudyConfig;
use ncfdg::solver::SolverConfig;
use ncfdg::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub problem: String,
    pub degree: usize,
    pub levels: Vec<usize>,
    pub mode: PenaltyMode,
    pub alpha: Option<f64>,
    pub tau: TauVariant,
    pub epsilon: Option<f64>,
    pub solver: SolverConfig,
    /// Replaces the solver's default tolerance.
    pub solver_tol: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub export_mesh: bool,
    pub dump_matrix: bool,
    pub expect_eoc: Option<f64>,
    pub eoc_tol: f64,
    pub max_residual: Option<f64>,
    pub jump_tol: f64,
    /// Expressions for `--problem custom`.
    pub exprs: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            problem: "pure_diffusion".into(),
            degree: 1,
            levels: vec![8, 16, 32],
            mode: PenaltyMode::MinimalDfd,
            alpha: None,
            tau: TauVariant::Pointwise,
            epsilon: None,
            solver: SolverConfig::direct(),
            solver_tol: None,
            seed: 0,
            trials: 100,
            out: None,
            mesh: None,
            export_mesh: false,
            dump_matrix: false,
            expect_eoc: None,
            eoc_tol: 0.15,
            max_residual: None,
            jump_tol: 0.1,
            exprs: BTreeMap::new(),
        }
    }
}

fn invalid(key: &str, value: &str, what: &str) -> Error {
    Error::InvalidArgument(format!("`{key}`: cannot read `{value}` as {what}"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.trim().parse().map_err(|_| invalid(key, value, what))
}

fn positive(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value, "a number")?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, value, "a positive number"))
    }
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(invalid(key, value, "a boolean")),
    }
}

impl Settings {
    /// Applies one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(name) = key.strip_prefix("expr.") {
            self.exprs.insert(name.trim().to_string(), value.trim().to_string());
            return Ok(());
        }
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "problem" => self.problem = v.to_string(),
            "degree" => {
                self.degree = number(&key, v, "a degree")?;
                if self.degree == 0 {
                    return Err(invalid(&key, v, "a degree of at least 1"));
                }
            }
            "levels" => {
                self.levels = v
                    .split(',')
                    .map(|s| number(&key, s, "a comma-separated list of mesh sizes"))
                    .collect::<Result<_>>()?;
                if self.levels.is_empty() || self.levels.contains(&0) {
                    return Err(invalid(&key, v, "positive mesh sizes"));
                }
            }
            "mode" => self.mode = v.parse()?,
            "alpha" => self.alpha = Some(positive(&key, v)?),
            "tau" => self.tau = v.parse()?,
            "epsilon" => {
                let e: f64 = number(&key, v, "a number")?;
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(invalid(&key, v, "a nonnegative number"));
                }
                self.epsilon = Some(e);
            }
            "solver" => self.solver = v.parse()?,
            "solver-tol" => self.solver_tol = Some(positive(&key, v)?),
            "seed" => self.seed = number(&key, v, "an unsigned integer")?,
            "trials" => self.trials = number(&key, v, "a count")?,
            "out" => self.out = Some(PathBuf::from(v)),
            "mesh" => self.mesh = Some(PathBuf::from(v)),
            "export-mesh" => self.export_mesh = boolean(&key, v)?,
            "dump-matrix" => self.dump_matrix = boolean(&key, v)?,
            "expect-eoc" => self.expect_eoc = Some(number(&key, v, "a number")?),
            "eoc-tol" => self.eoc_tol = positive(&key, v)?,
            "max-residual" => self.max_residual = Some(positive(&key, v)?),
            "jump-tol" => self.jump_tol = positive(&key, v)?,
            _ => return Err(Error::InvalidArgument(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Applies every entry of a config file's text.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("{origin}:{}: expected `key = value`, got `{line}`", i + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::InvalidArgument(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn stabilization(&self) -> StabilizationConfig {
        StabilizationConfig {
            alpha: self.alpha,
            tau: self.tau,
            c_inv: None,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        let mut cfg = self.solver;
        if let Some(t) = self.solver_tol {
            match &mut cfg {
                SolverConfig::Direct { tol } | SolverConfig::Krylov { tol, .. } => *tol = t,
            }
        }
        cfg
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            degree: self.degree,
            mode: self.mode,
            stabilization: self.stabilization(),
            solver: self.solver(),
        }
    }
}
