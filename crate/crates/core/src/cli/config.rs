//! Run configuration: a TOML document with `domain`, `g`, `forcing`,
//! `sweep`, `solver`, and `output` blocks. Unknown keys are rejected so a
//! typo cannot silently change a scientific run.

use super::CliError;
use crate::expr::{Expr, Var};
use crate::mesh::Mesh;
use crate::model::{
    ContinuationControls, Forcing, Nonlinearity, ProblemSpec, SolverControls, SpatialFn,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub g: GConfig,
    pub forcing: ForcingConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Treat a hypothesis violation as an error instead of a warning.
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: String,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub n: Option<usize>,
    #[serde(rename = "Lx")]
    pub lx: Option<f64>,
    #[serde(rename = "Ly")]
    pub ly: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GConfig {
    /// Expression in `x`, `y`, `u`.
    pub expr: Option<String>,
    /// Catalog name: `tanh`, `gaussian_bump`, or `modulated_tanh`.
    pub builtin: Option<String>,
    /// Amplitude `a(x)` for `modulated_tanh`.
    pub amplitude: Option<String>,
    /// Declared derivative bound.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    /// Declared asymptotes `g(x, -∞)` and `g(x, +∞)` as expressions in `x`.
    pub asymptote_minus: Option<String>,
    pub asymptote_plus: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    /// Full forcing `p(x)`; mutually exclusive with `mu0`/`theta`.
    pub p: Option<String>,
    pub mu0: Option<f64>,
    /// Zero-mean part `θ(x)`; any residual mean moves into `μ₀`.
    pub theta: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub xi_min: f64,
    pub xi_max: f64,
    pub step: f64,
    pub anchor: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            xi_min: -5.0,
            xi_max: 5.0,
            step: 0.1,
            anchor: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub k_step: f64,
    pub min_k_step: f64,
    #[serde(default)]
    pub verify_jacobians: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 25,
            k_step: 0.1,
            min_k_step: 1e-4,
            verify_jacobians: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub plot_script: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            snapshots: Vec::new(),
            plot_script: false,
        }
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config_str(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses a configuration document from memory.
pub fn load_config_str(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    for v in [cfg.sweep.xi_min, cfg.sweep.xi_max, cfg.sweep.step] {
        if !v.is_finite() {
            return Err(CliError::Config("sweep entries must be finite".into()));
        }
    }
    Ok(cfg)
}

fn parse_expr(text: &str, what: &str) -> Result<Expr, CliError> {
    Expr::parse(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

fn spatial(text: &str, what: &str) -> Result<SpatialFn, CliError> {
    let e = parse_expr(text, what)?;
    if e.uses_var(Var::U) {
        return Err(CliError::Config(format!(
            "{what} must not reference the state variable u"
        )));
    }
    Ok(SpatialFn::Expr(e))
}

fn build_mesh(cfg: &DomainConfig) -> Result<Mesh, CliError> {
    let mesh = match cfg.kind.as_str() {
        "interval" => {
            let l = cfg
                .l
                .ok_or_else(|| CliError::Config("domain.L required for an interval".into()))?;
            let n = cfg
                .n
                .ok_or_else(|| CliError::Config("domain.n required for an interval".into()))?;
            Mesh::interval(l, n)
        }
        "rectangle" => {
            let lx = cfg
                .lx
                .ok_or_else(|| CliError::Config("domain.Lx required for a rectangle".into()))?;
            let ly = cfg
                .ly
                .ok_or_else(|| CliError::Config("domain.Ly required for a rectangle".into()))?;
            let nx = cfg
                .nx
                .ok_or_else(|| CliError::Config("domain.nx required for a rectangle".into()))?;
            let ny = cfg
                .ny
                .ok_or_else(|| CliError::Config("domain.ny required for a rectangle".into()))?;
            Mesh::rectangle(lx, ly, nx, ny)
        }
        other => {
            return Err(CliError::Config(format!(
                "domain.kind must be `interval` or `rectangle`, got `{other}`"
            )))
        }
    };
    mesh.map_err(|e| CliError::Config(format!("domain: {e}")))
}

fn build_nonlinearity(cfg: &GConfig) -> Result<Nonlinearity, CliError> {
    let mut g = match (&cfg.expr, &cfg.builtin) {
        (Some(text), None) => Nonlinearity::from_expr(parse_expr(text, "g.expr")?)
            .map_err(|e| CliError::Config(format!("g.expr: {e}")))?,
        (None, Some(name)) => match name.as_str() {
            "tanh" => Nonlinearity::tanh(),
            "gaussian_bump" => Nonlinearity::gaussian_bump(),
            "modulated_tanh" => {
                let amp = cfg.amplitude.as_deref().ok_or_else(|| {
                    CliError::Config("g.amplitude required for modulated_tanh".into())
                })?;
                Nonlinearity::modulated_tanh(spatial(amp, "g.amplitude")?)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown builtin nonlinearity `{other}`"
                )))
            }
        },
        _ => {
            return Err(CliError::Config(
                "g requires exactly one of `expr` or `builtin`".into(),
            ))
        }
    };
    if cfg.amplitude.is_some() && cfg.builtin.as_deref() != Some("modulated_tanh") {
        return Err(CliError::Config(
            "g.amplitude only applies to the modulated_tanh builtin".into(),
        ));
    }
    if let Some(m) = cfg.m {
        g = g.with_declared_bound(m);
    }
    match (&cfg.asymptote_minus, &cfg.asymptote_plus) {
        (Some(lo), Some(hi)) => {
            g = g.with_asymptotes(
                spatial(lo, "g.asymptote_minus")?,
                spatial(hi, "g.asymptote_plus")?,
            );
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Config(
                "declare both asymptotes or neither".into(),
            ))
        }
    }
    Ok(g)
}

fn sample_spatial(mesh: &Mesh, e: &Expr, what: &str) -> Result<Vec<f64>, CliError> {
    if e.uses_var(Var::U) {
        return Err(CliError::Config(format!(
            "{what} must not reference the state variable u"
        )));
    }
    if e.uses_var(Var::Y) && !mesh.is_two_dimensional() {
        return Err(CliError::Config(format!(
            "{what} uses y on a one-dimensional domain"
        )));
    }
    (0..mesh.interior_count())
        .map(|i| {
            let (x, y) = mesh.interior_coord(i);
            e.eval(x, y, 0.0)
                .map_err(|err| CliError::Config(format!("{what}: {err}")))
        })
        .collect()
}

fn build_forcing(mesh: &Mesh, cfg: &ForcingConfig) -> Result<Forcing, CliError> {
    match (&cfg.p, &cfg.mu0, &cfg.theta) {
        (Some(ptext), None, None) => {
            let samples = sample_spatial(mesh, &parse_expr(ptext, "forcing.p")?, "forcing.p")?;
            Forcing::decompose(mesh, &samples)
                .map_err(|e| CliError::Config(format!("forcing.p: {e}")))
        }
        (None, mu0, theta) => {
            if mu0.is_none() && theta.is_none() {
                return Err(CliError::Config(
                    "forcing requires `p`, or `mu0` and/or `theta`".into(),
                ));
            }
            let theta_samples = match theta {
                Some(text) => {
                    sample_spatial(mesh, &parse_expr(text, "forcing.theta")?, "forcing.theta")?
                }
                None => vec![0.0; mesh.interior_count()],
            };
            Forcing::from_parts(mesh, mu0.unwrap_or(0.0), &theta_samples)
                .map_err(|e| CliError::Config(format!("forcing: {e}")))
        }
        _ => Err(CliError::Config(
            "forcing takes either `p` or `mu0`/`theta`, not both".into(),
        )),
    }
}

/// Builds the in-memory problem from a parsed configuration.
pub fn build_problem(cfg: &RunConfig) -> Result<ProblemSpec, CliError> {
    let mesh = build_mesh(&cfg.domain)?;
    let g = build_nonlinearity(&cfg.g)?;
    let forcing = build_forcing(&mesh, &cfg.forcing)?;
    let solver = SolverControls {
        tolerance: cfg.solver.tolerance,
        max_iterations: cfg.solver.max_iterations,
    };
    let continuation = ContinuationControls {
        k_step: cfg.solver.k_step,
        min_k_step: cfg.solver.min_k_step,
        xi_min: cfg.sweep.xi_min,
        xi_max: cfg.sweep.xi_max,
        xi_step: cfg.sweep.step,
        anchor: cfg.sweep.anchor,
        snapshot_xis: cfg.output.snapshots.clone(),
        verify_jacobians: cfg.solver.verify_jacobians,
    };
    ProblemSpec::new(mesh, g, forcing, solver, continuation)
        .map_err(|e| CliError::Config(e.to_string()))
}
