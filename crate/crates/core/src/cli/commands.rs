//! Command implementations behind the `check`, `sweep`, `trace`, and `solve`
//! subcommands. Exit codes: 0 success, 2 strict hypothesis violation,
//! 3 continuation/solver failure (partial results still written), 4 config
//! or environment error.

use super::config::{build_problem, RunConfig};
use super::io::{
    atomic_write, curve_from_csv, curve_to_csv, plot_script, solution_to_csv, CurveMeta,
    TraceSummaryRecord,
};
use super::CliError;
use crate::analysis::{check_hypotheses, HypothesisReport};
use crate::continuation::{
    continue_in_k, curve_summary, sweep_xi, trace_mu_crossings, ContinuationCurve,
    ContinuationError, Provenance,
};
use crate::model::ProblemSpec;
use std::path::{Path, PathBuf};

/// Command-line overrides shared by the subcommands.
#[derive(Debug, Default, Clone)]
pub struct Options {
    pub strict: bool,
    pub resume: bool,
    pub out: Option<PathBuf>,
    pub mu0: Option<f64>,
    pub xi1: Option<f64>,
}

fn out_dir(cfg: &RunConfig, opts: &Options) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| cfg.output.directory.clone())
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

/// Runs the hypothesis check, prints the report, and persists it as JSON.
/// Under `strict`, a violated bound is an error (exit 2).
pub fn run_check(cfg: &RunConfig, opts: &Options) -> Result<HypothesisReport, CliError> {
    let spec = build_problem(cfg)?;
    let report = checked_report(cfg, opts, &spec)?;
    let dir = out_dir(cfg, opts);
    ensure_dir(&dir)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))?;
    atomic_write(&dir.join("report.json"), &json)?;
    Ok(report)
}

/// Check + strict gate shared by every command; prints the report.
fn checked_report(
    cfg: &RunConfig,
    opts: &Options,
    spec: &ProblemSpec,
) -> Result<HypothesisReport, CliError> {
    let report = check_hypotheses(spec).map_err(|e| CliError::Solver(e.to_string()))?;
    println!("{report}");
    let strict = cfg.strict || opts.strict;
    if strict && !report.satisfied {
        return Err(CliError::HypothesesViolated {
            m: report.m_bound,
            bound: report.c0.min(report.lambda2),
        });
    }
    if !report.satisfied {
        eprintln!("warning: M = {} is not below min(c0, lambda2) = {}; continuation may stall",
            report.m_bound,
            report.c0.min(report.lambda2));
    }
    Ok(report)
}

fn load_existing_curve(
    dir: &Path,
    spec: &ProblemSpec,
) -> Result<Option<ContinuationCurve>, CliError> {
    let csv_path = dir.join("curve.csv");
    let meta_path = dir.join("curve.meta.json");
    if !csv_path.exists() || !meta_path.exists() {
        return Ok(None);
    }
    let meta_text = std::fs::read_to_string(&meta_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: CurveMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Config(format!("{}: {e}", meta_path.display())))?;
    if !meta.matches_hash(spec.content_hash()) {
        return Err(CliError::Config(format!(
            "persisted curve in {} belongs to a different problem (hash {} vs {:016x})",
            dir.display(),
            meta.spec_hash,
            spec.content_hash()
        )));
    }
    let csv_text = std::fs::read_to_string(&csv_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", csv_path.display())))?;
    let prov = Provenance {
        spec_hash: spec.content_hash(),
        newton_tolerance: meta.newton_tolerance,
        k_step: meta.k_step,
        xi_step: meta.xi_step,
    };
    Ok(Some(curve_from_csv(&csv_text, prov)?))
}

/// Extends a persisted curve to the requested range; sides already covered
/// are reused without recomputation.
fn extend_curve(
    spec: &ProblemSpec,
    mut curve: ContinuationCurve,
) -> Result<ContinuationCurve, CliError> {
    let want_min = spec.continuation.xi_min;
    let want_max = spec.continuation.xi_max;
    let have_min = curve.samples.first().map(|s| s.xi1).unwrap_or(f64::INFINITY);
    let have_max = curve
        .samples
        .last()
        .map(|s| s.xi1)
        .unwrap_or(f64::NEG_INFINITY);
    let tol = 1e-9 * spec.continuation.xi_step;

    if want_min < have_min - tol {
        let mut sub = spec.clone();
        sub.continuation.xi_min = want_min;
        sub.continuation.xi_max = have_min;
        sub.continuation.anchor = Some(have_min);
        sub.continuation.snapshot_xis.clear();
        let left = sweep_xi(&sub).map_err(map_continuation_err)?;
        let mut samples = left.samples;
        // the anchor duplicates the existing first sample
        samples.pop();
        samples.extend(curve.samples);
        curve.samples = samples;
        curve.warnings.extend(left.warnings);
        curve.stalls.extend(left.stalls);
    }
    if want_max > have_max + tol {
        let mut sub = spec.clone();
        sub.continuation.xi_min = have_max;
        sub.continuation.xi_max = want_max;
        sub.continuation.anchor = Some(have_max);
        sub.continuation.snapshot_xis.clear();
        let right = sweep_xi(&sub).map_err(map_continuation_err)?;
        curve.samples.extend(right.samples.into_iter().skip(1));
        curve.warnings.extend(right.warnings);
        curve.stalls.extend(right.stalls);
    }
    Ok(curve)
}

fn map_continuation_err(e: ContinuationError) -> CliError {
    match e {
        ContinuationError::Stalled { last_k, xi1, .. } => CliError::Stalled {
            what: format!("homotopy stalled at k = {last_k} (ξ₁ = {xi1})"),
        },
        other => CliError::Solver(other.to_string()),
    }
}

fn write_curve_files(
    dir: &Path,
    cfg: &RunConfig,
    curve: &ContinuationCurve,
    include_snapshots: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let partial = curve.is_partial();
    let csv_name = if partial { "curve.csv.partial" } else { "curve.csv" };
    let csv_path = dir.join(csv_name);
    atomic_write(&csv_path, &curve_to_csv(curve))?;
    written.push(csv_path);
    let meta = CurveMeta::from_provenance(&curve.provenance);
    let meta_json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Config(format!("cannot serialize curve metadata: {e}")))?;
    let meta_path = dir.join("curve.meta.json");
    atomic_write(&meta_path, &meta_json)?;
    written.push(meta_path);
    if include_snapshots {
        for (idx, (_xi, state)) in curve.snapshots.iter().enumerate() {
            let path = dir.join(format!("solution_{idx}.csv"));
            atomic_write(&path, &solution_to_csv(&cfg_mesh(cfg)?, state))?;
            written.push(path);
        }
    }
    if cfg.output.plot_script {
        let path = dir.join("curve.gp");
        atomic_write(&path, &plot_script(csv_name))?;
        written.push(path);
    }
    for w in &curve.warnings {
        eprintln!("warning: {w}");
    }
    Ok(written)
}

fn cfg_mesh(cfg: &RunConfig) -> Result<crate::mesh::Mesh, CliError> {
    // snapshots carry interior fields only; rebuilding the mesh is cheap
    Ok(build_problem(cfg)?.mesh)
}

/// Sweeps the configured `ξ₁` range and persists `curve.csv` (plus optional
/// snapshots and plot script). A stalled sweep writes `curve.csv.partial`
/// and returns the stall error (exit 3).
pub fn run_sweep(cfg: &RunConfig, opts: &Options) -> Result<ContinuationCurve, CliError> {
    let spec = build_problem(cfg)?;
    checked_report(cfg, opts, &spec)?;
    let dir = out_dir(cfg, opts);
    ensure_dir(&dir)?;

    let curve = if opts.resume {
        match load_existing_curve(&dir, &spec)? {
            Some(existing) => extend_curve(&spec, existing)?,
            None => sweep_xi(&spec).map_err(map_continuation_err)?,
        }
    } else {
        sweep_xi(&spec).map_err(map_continuation_err)?
    };

    write_curve_files(&dir, cfg, &curve, true)?;
    println!(
        "sweep: {} samples over [{}, {}]{}",
        curve.samples.len(),
        curve.samples.first().map(|s| s.xi1).unwrap_or(f64::NAN),
        curve.samples.last().map(|s| s.xi1).unwrap_or(f64::NAN),
        if curve.is_partial() { " (partial)" } else { "" }
    );
    if curve.is_partial() {
        return Err(CliError::Stalled {
            what: "sweep stalled before covering the requested range".into(),
        });
    }
    Ok(curve)
}

/// Sweeps (or loads a matching persisted curve), locates all crossings
/// `μ(ξ₁) = μ₀`, writes one solution file per crossing plus `summary.json`.
/// Zero crossings is a valid outcome (exit 0).
pub fn run_trace(cfg: &RunConfig, opts: &Options) -> Result<TraceSummaryRecord, CliError> {
    let spec = build_problem(cfg)?;
    let report = checked_report(cfg, opts, &spec)?;
    let dir = out_dir(cfg, opts);
    ensure_dir(&dir)?;

    let loaded = load_existing_curve(&dir, &spec).unwrap_or(None);
    let (curve, fresh) = match loaded {
        Some(c) if c.samples.len() >= 2 => {
            if opts.resume {
                (extend_curve(&spec, c)?, true)
            } else {
                (c, false)
            }
        }
        _ => (sweep_xi(&spec).map_err(map_continuation_err)?, true),
    };
    if fresh {
        // crossing solutions own the solution_<i>.csv names under trace
        write_curve_files(&dir, cfg, &curve, false)?;
    }

    let mu0 = opts.mu0.unwrap_or_else(|| spec.forcing.mu0());
    let outcome = trace_mu_crossings(&curve, &spec, mu0);
    let summary = curve_summary(&curve, &spec, Some(mu0))
        .map_err(|e| CliError::Solver(e.to_string()))?;

    let mut crossings = outcome.crossings.iter().collect::<Vec<_>>();
    crossings.sort_by(|a, b| a.state.xi1.partial_cmp(&b.state.xi1).expect("finite"));
    for (idx, c) in crossings.iter().enumerate() {
        let path = dir.join(format!("solution_{idx}.csv"));
        atomic_write(&path, &solution_to_csv(&spec.mesh, &c.state))?;
    }

    let record = TraceSummaryRecord::build(mu0, &outcome, &summary, &report.verdict);
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::Config(format!("cannot serialize summary: {e}")))?;
    atomic_write(&dir.join("summary.json"), &json)?;

    println!(
        "trace: {} crossing(s) of mu0 = {mu0}",
        record.crossing_count
    );
    for (i, xi) in record.roots_xi1.iter().enumerate() {
        println!("  solution {i}: xi1 = {xi:.12}, b = {:.12}", record.roots_b[i]);
    }
    println!(
        "  curve extremes: mu- = {:.12} at xi1 = {:.6}, mu+ = {:.12} at xi1 = {:.6}",
        record.mu_minus, record.mu_minus_at, record.mu_plus, record.mu_plus_at
    );
    println!("  window verdict for mu0: {}", record.window_verdict);
    if record.crossing_count == 0 {
        println!("  no crossings in the sampled range");
    }
    if curve.is_partial() {
        return Err(CliError::Stalled {
            what: "underlying sweep stalled; trace ran on the partial curve".into(),
        });
    }
    Ok(record)
}

/// One homotopy run to `k = 1` at a fixed average, writing the field.
pub fn run_solve(cfg: &RunConfig, opts: &Options) -> Result<(), CliError> {
    let xi1 = opts
        .xi1
        .ok_or_else(|| CliError::Config("solve requires --xi1".into()))?;
    let spec = build_problem(cfg)?;
    checked_report(cfg, opts, &spec)?;
    let dir = out_dir(cfg, opts);
    ensure_dir(&dir)?;
    let (state, trace) = continue_in_k(&spec, xi1).map_err(map_continuation_err)?;
    println!(
        "solve: xi1 = {xi1}, mu = {:.12}, b = {:.12} ({} homotopy steps)",
        state.mu,
        state.b(),
        trace.len()
    );
    atomic_write(&dir.join("solution_0.csv"), &solution_to_csv(&spec.mesh, &state))?;
    Ok(())
}
