//! Two-stage continuation.
//!
//! Stage one marches the homotopy parameter `k` from the linear problem at
//! `k = 0` to the full nonlinearity at `k = 1`, holding the solution average
//! `ξ₁` fixed; the previous solution is the predictor and the step halves on
//! Newton failure. Stage two sweeps `ξ₁` at `k = 1` from an anchor outward
//! in both directions, producing the curve `μ(ξ₁)`; crossings `μ(ξ₁) = μ₀`
//! are then refined to solutions of the original problem.
//!
//! Natural-parameter continuation is used throughout: under the hypothesis
//! `M < min(c₀, λ₂)` the curve has no turning points, and the stall error
//! path covers hypothesis-violating inputs. The bordered Jacobian condition
//! estimate is logged at every accepted point and a warning is recorded
//! whenever it exceeds `1 / (100 ε)`; such points are never silently
//! accepted as healthy.

use crate::analysis::{check_hypotheses, AnalysisError, HypothesisReport};
use crate::model::ProblemSpec;
use crate::solver::{
    diagnose, newton_solve, solve_linear_k0, verify_jacobian, AugmentedState, NewtonReport,
    SolverError,
};
use thiserror::Error;

/// Condition-estimate ceiling, the numerical no-turning-point monitor.
const CONDITION_CEILING: f64 = 1.0 / (100.0 * f64::EPSILON);
/// Sweep-local step halving floor, relative to the nominal step.
const SWEEP_STEP_FLOOR: f64 = 1e-4;
/// Crossing refinement target on `|μ - μ₀|`.
const CROSSING_TOL: f64 = 1e-10;
/// Near-touch threshold for grazing reports.
const GRAZING_TOL: f64 = 1e-8;
/// Finite-difference Jacobian verification threshold (relative).
const JACOBIAN_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ContinuationError {
    #[error("continuation stalled at k = {last_k} (ξ₁ = {xi1}): step below {min_step}")]
    Stalled {
        last_k: f64,
        xi1: f64,
        min_step: f64,
        trace: Vec<KTraceSample>,
        report: Box<HypothesisReport>,
    },
    #[error("curve has {got} samples, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// One accepted homotopy step.
#[derive(Debug, Clone, Copy)]
pub struct KTraceSample {
    pub k: f64,
    pub mu: f64,
    pub b: f64,
    pub newton_iterations: usize,
    pub condition_estimate: f64,
}

/// One accepted sweep sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub xi1: f64,
    pub mu: f64,
    pub b: f64,
    /// `‖u - ξ₁‖_∞` including the boundary value.
    pub sup_norm_u: f64,
    pub newton_iterations: usize,
    pub condition_estimate: f64,
}

/// Identifies the problem a curve belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub spec_hash: u64,
    pub newton_tolerance: f64,
    pub k_step: f64,
    pub xi_step: f64,
}

/// Where and how a sweep direction stalled.
#[derive(Debug, Clone, Copy)]
pub struct StallInfo {
    /// `+1` marching toward `ξ_max`, `-1` toward `ξ_min`.
    pub direction: i8,
    pub at_xi: f64,
    pub last_step: f64,
}

/// The sampled solution curve `(ξ₁, μ, b, …)` at `k = 1`.
#[derive(Debug, Clone)]
pub struct ContinuationCurve {
    /// Samples in strictly increasing `ξ₁` order, every one converged.
    pub samples: Vec<CurveSample>,
    /// Full fields captured at the configured snapshot `ξ₁` values.
    pub snapshots: Vec<(f64, AugmentedState)>,
    pub provenance: Provenance,
    /// Condition-ceiling and Jacobian-check notices.
    pub warnings: Vec<String>,
    /// Non-empty when a direction stalled before reaching its bound.
    pub stalls: Vec<StallInfo>,
}

impl ContinuationCurve {
    pub fn is_partial(&self) -> bool {
        !self.stalls.is_empty()
    }

    /// Sign changes of `μ(ξ₁) - level` between adjacent samples.
    pub fn crossing_count(&self, level: f64) -> usize {
        bracket_indices(&self.samples, level).len()
    }

    /// Checks the curve invariants: strictly increasing `ξ₁` and no gap
    /// larger than `max_step` (plus roundoff slack).
    pub fn validate(&self, max_step: f64) -> Result<(), String> {
        for w in self.samples.windows(2) {
            if w[1].xi1 <= w[0].xi1 {
                return Err(format!(
                    "samples not strictly increasing at ξ₁ = {}",
                    w[1].xi1
                ));
            }
            let gap = w[1].xi1 - w[0].xi1;
            if gap > max_step * (1.0 + 1e-9) {
                return Err(format!(
                    "gap {gap} exceeds the configured step {max_step}"
                ));
            }
        }
        Ok(())
    }
}

fn mean_balance_mu(spec: &ProblemSpec, state: &AugmentedState, k: f64) -> Option<f64> {
    let mut acc = 0.0;
    for (idx, w) in spec.mesh.weights().iter().enumerate() {
        let (x, y) = spec.mesh.interior_coord(idx);
        match spec.g.eval(x, y, state.u_at(idx)) {
            Ok(g) if g.is_finite() => acc += w * g,
            _ => return None,
        }
    }
    Some(k * acc / spec.mesh.volume())
}

fn retriable(err: &SolverError) -> bool {
    matches!(
        err,
        SolverError::MaxIterations { .. }
            | SolverError::Singular(_)
            | SolverError::Divergence { .. }
            | SolverError::NonFinite { .. }
            | SolverError::Expr(_)
    )
}

fn monitor(
    warnings: &mut Vec<String>,
    spec: &ProblemSpec,
    state: &AugmentedState,
    report: &NewtonReport,
    label: &str,
) {
    if report.condition_estimate > CONDITION_CEILING {
        warnings.push(format!(
            "condition estimate {:.3e} above ceiling {:.3e} at {label}",
            report.condition_estimate, CONDITION_CEILING
        ));
    }
    if spec.continuation.verify_jacobians {
        match verify_jacobian(spec, state, 20, 0x7ac0_b1a5) {
            Ok(worst) if worst <= JACOBIAN_CHECK_TOL => {}
            Ok(worst) => warnings.push(format!(
                "Jacobian disagrees with finite differences by {worst:.3e} at {label}"
            )),
            Err(e) => warnings.push(format!("Jacobian verification failed at {label}: {e}")),
        }
    }
}

/// Marches `k` from 0 to 1 at fixed average `ξ₁`, starting from the linear
/// solve. Returns the state at `k = 1` and the accepted trace.
pub fn continue_in_k(
    spec: &ProblemSpec,
    xi1: f64,
) -> Result<(AugmentedState, Vec<KTraceSample>), ContinuationError> {
    let (mut state, report0) = solve_linear_k0(spec, xi1)?;
    let mut trace = vec![KTraceSample {
        k: 0.0,
        mu: state.mu,
        b: state.b(),
        newton_iterations: report0.iterations,
        condition_estimate: report0.condition_estimate,
    }];
    let mut k = 0.0;
    let mut dk = spec.continuation.k_step;
    let mut warnings = Vec::new();
    while k < 1.0 {
        let target = (k + dk).min(1.0);
        let mut predictor = state.clone();
        if let Some(mu) = mean_balance_mu(spec, &predictor, target) {
            predictor.mu = mu;
        }
        match newton_solve(spec, target, xi1, &predictor) {
            Ok((next, report)) => {
                monitor(&mut warnings, spec, &next, &report, &format!("k = {target}"));
                state = next;
                k = target;
                trace.push(KTraceSample {
                    k,
                    mu: state.mu,
                    b: state.b(),
                    newton_iterations: report.iterations,
                    condition_estimate: report.condition_estimate,
                });
                dk = (dk * 2.0).min(spec.continuation.k_step);
            }
            Err(e) if retriable(&e) => {
                dk *= 0.5;
                if dk < spec.continuation.min_k_step {
                    let report = check_hypotheses(spec)?;
                    return Err(ContinuationError::Stalled {
                        last_k: k,
                        xi1,
                        min_step: spec.continuation.min_k_step,
                        trace,
                        report: Box::new(report),
                    });
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((state, trace))
}

/// Constant-shift predictor: in deviation form the shifted field is the
/// previous deviation unchanged about the new average; the multiplier is
/// re-predicted from the discrete mean balance.
fn shift_predictor(spec: &ProblemSpec, state: &AugmentedState, xi_new: f64) -> AugmentedState {
    let mut p = state.clone();
    p.xi1 = xi_new;
    if let Some(mu) = mean_balance_mu(spec, &p, p.k) {
        p.mu = mu;
    }
    p
}

struct MarchOutput {
    samples: Vec<CurveSample>,
    snapshots: Vec<(f64, AugmentedState)>,
    stall: Option<StallInfo>,
    warnings: Vec<String>,
}

/// Marches from `anchor_state` through the ordered `targets` (all on one
/// side of the anchor), halving locally on failure.
fn march(
    spec: &ProblemSpec,
    anchor_state: &AugmentedState,
    targets: &[f64],
    snapshot_set: &[f64],
    direction: i8,
) -> Result<MarchOutput, ContinuationError> {
    let mut out = MarchOutput {
        samples: Vec::with_capacity(targets.len()),
        snapshots: Vec::new(),
        stall: None,
        warnings: Vec::new(),
    };
    let step_floor = SWEEP_STEP_FLOOR * spec.continuation.xi_step;
    let mut state = anchor_state.clone();
    let mut idx = 0usize;
    while idx < targets.len() {
        let target = targets[idx];
        let full_gap = target - state.xi1;
        let mut sub = full_gap;
        loop {
            let trial_xi = state.xi1 + sub;
            let predictor = shift_predictor(spec, &state, trial_xi);
            match newton_solve(spec, 1.0, trial_xi, &predictor) {
                Ok((next, report)) => {
                    monitor(
                        &mut out.warnings,
                        spec,
                        &next,
                        &report,
                        &format!("ξ₁ = {trial_xi}"),
                    );
                    out.samples.push(CurveSample {
                        xi1: next.xi1,
                        mu: next.mu,
                        b: next.b(),
                        sup_norm_u: next.sup_norm_deviation(),
                        newton_iterations: report.iterations,
                        condition_estimate: report.condition_estimate,
                    });
                    if snapshot_set
                        .iter()
                        .any(|s| (s - next.xi1).abs() <= 1e-12 * (1.0 + s.abs()))
                    {
                        out.snapshots.push((next.xi1, next.clone()));
                    }
                    state = next;
                    if (state.xi1 - target).abs() <= 1e-12 * (1.0 + target.abs()) {
                        idx += 1;
                        break;
                    }
                    // partial progress toward the target; keep going
                    sub = target - state.xi1;
                }
                Err(e) if retriable(&e) => {
                    sub *= 0.5;
                    if sub.abs() < step_floor {
                        out.stall = Some(StallInfo {
                            direction,
                            at_xi: state.xi1,
                            last_step: sub.abs() * 2.0,
                        });
                        return Ok(out);
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(out)
}

/// Uniform marks from the anchor to `bound`, merged with the snapshot points
/// on that side, endpoint included.
fn side_targets(anchor: f64, bound: f64, step: f64, snapshots: &[f64]) -> Vec<f64> {
    let span = (bound - anchor).abs();
    if span <= 1e-12 * (1.0 + bound.abs()) {
        return Vec::new();
    }
    let dir = if bound > anchor { 1.0 } else { -1.0 };
    let count = (span / step + 1e-9).floor() as usize;
    let mut marks: Vec<f64> = (1..=count).map(|j| anchor + dir * j as f64 * step).collect();
    match marks.last() {
        Some(last) if (bound - last).abs() > 1e-9 * step => marks.push(bound),
        None => marks.push(bound),
        _ => {
            *marks.last_mut().expect("nonempty") = bound;
        }
    }
    for &s in snapshots {
        let inside = (dir > 0.0 && s > anchor && s <= bound)
            || (dir < 0.0 && s < anchor && s >= bound);
        if inside && !marks.iter().any(|m| (m - s).abs() <= 1e-12 * (1.0 + s.abs())) {
            marks.push(s);
        }
    }
    marks.sort_by(|a, b| {
        if dir > 0.0 {
            a.partial_cmp(b).expect("finite")
        } else {
            b.partial_cmp(a).expect("finite")
        }
    });
    marks
}

/// Sweeps `ξ₁` over the configured range at `k = 1`. The anchor solution
/// comes from [`continue_in_k`]; both directions then march with the
/// shifted-predecessor predictor. A stalled direction leaves a partial
/// curve with the stall recorded rather than an error.
pub fn sweep_xi(spec: &ProblemSpec) -> Result<ContinuationCurve, ContinuationError> {
    let cc = &spec.continuation;
    let anchor = cc
        .anchor
        .unwrap_or(0.5 * (cc.xi_min + cc.xi_max))
        .clamp(cc.xi_min, cc.xi_max);
    let (anchor_state, _trace) = continue_in_k(spec, anchor)?;

    let mut warnings = Vec::new();
    let anchor_sample = CurveSample {
        xi1: anchor_state.xi1,
        mu: anchor_state.mu,
        b: anchor_state.b(),
        sup_norm_u: anchor_state.sup_norm_deviation(),
        newton_iterations: 0,
        condition_estimate: _trace.last().map(|t| t.condition_estimate).unwrap_or(f64::NAN),
    };

    let right_targets = side_targets(anchor, cc.xi_max, cc.xi_step, &cc.snapshot_xis);
    let left_targets = side_targets(anchor, cc.xi_min, cc.xi_step, &cc.snapshot_xis);
    let right = march(spec, &anchor_state, &right_targets, &cc.snapshot_xis, 1)?;
    let left = march(spec, &anchor_state, &left_targets, &cc.snapshot_xis, -1)?;

    let mut samples: Vec<CurveSample> = left.samples.into_iter().rev().collect();
    samples.push(anchor_sample);
    samples.extend(right.samples);

    let mut snapshots = left.snapshots;
    if cc
        .snapshot_xis
        .iter()
        .any(|s| (s - anchor).abs() <= 1e-12 * (1.0 + s.abs()))
    {
        snapshots.push((anchor, anchor_state.clone()));
    }
    snapshots.extend(right.snapshots);
    snapshots.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));

    warnings.extend(left.warnings);
    warnings.extend(right.warnings);
    let mut stalls = Vec::new();
    stalls.extend(left.stall);
    stalls.extend(right.stall);

    Ok(ContinuationCurve {
        samples,
        snapshots,
        provenance: Provenance {
            spec_hash: spec.content_hash(),
            newton_tolerance: spec.solver.tolerance,
            k_step: cc.k_step,
            xi_step: cc.xi_step,
        },
        warnings,
        stalls,
    })
}

/// A refined solution of the original problem at one crossing.
#[derive(Debug, Clone)]
pub struct Crossing {
    pub state: AugmentedState,
    pub report: NewtonReport,
}

/// Near-touch of the level without a sign change.
#[derive(Debug, Clone, Copy)]
pub struct Grazing {
    pub xi1: f64,
    pub mu: f64,
}

/// A bracket whose refinement did not converge.
#[derive(Debug, Clone)]
pub struct CrossingFailure {
    pub between: (f64, f64),
    pub reason: String,
}

/// Outcome of a crossing search at one level.
#[derive(Debug)]
pub struct TraceOutcome {
    pub crossings: Vec<Crossing>,
    pub grazings: Vec<Grazing>,
    pub failures: Vec<CrossingFailure>,
}

fn bracket_indices(samples: &[CurveSample], level: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..samples.len().saturating_sub(1) {
        let f0 = samples[i].mu - level;
        let f1 = samples[i + 1].mu - level;
        if f0 * f1 < 0.0 || (f0 == 0.0 && f1 != 0.0) {
            out.push(i);
        }
    }
    out
}

/// Locates every crossing `μ(ξ₁) = μ₀` on the sampled curve and refines each
/// by a bracketed secant iteration with fresh Newton solves until
/// `|μ - μ₀| ≤ 1e-10`. Near-touches within `1e-8` of the level without a
/// sign change are reported as grazings.
pub fn trace_mu_crossings(
    curve: &ContinuationCurve,
    spec: &ProblemSpec,
    mu0: f64,
) -> TraceOutcome {
    let samples = &curve.samples;
    let mut outcome = TraceOutcome {
        crossings: Vec::new(),
        grazings: Vec::new(),
        failures: Vec::new(),
    };
    let brackets = bracket_indices(samples, mu0);

    // grazing scan: local near-touches away from any bracket
    for (i, s) in samples.iter().enumerate() {
        let f = s.mu - mu0;
        if f.abs() < GRAZING_TOL {
            let in_bracket = brackets
                .iter()
                .any(|&b| i == b || i == b + 1);
            if !in_bracket {
                outcome.grazings.push(Grazing { xi1: s.xi1, mu: s.mu });
            }
        }
    }

    for &i in &brackets {
        match refine_crossing(spec, samples[i], samples[i + 1], mu0) {
            Ok(crossing) => {
                // re-verify the four converged-state invariants independently
                match diagnose(spec, &crossing.state) {
                    Ok(d) if d.within(spec.solver.tolerance) => {
                        outcome.crossings.push(crossing)
                    }
                    Ok(d) => outcome.failures.push(CrossingFailure {
                        between: (samples[i].xi1, samples[i + 1].xi1),
                        reason: format!("refined state fails re-verification: {d:?}"),
                    }),
                    Err(e) => outcome.failures.push(CrossingFailure {
                        between: (samples[i].xi1, samples[i + 1].xi1),
                        reason: format!("re-verification failed: {e}"),
                    }),
                }
            }
            Err(reason) => outcome.failures.push(CrossingFailure {
                between: (samples[i].xi1, samples[i + 1].xi1),
                reason,
            }),
        }
    }
    outcome
}

fn refine_crossing(
    spec: &ProblemSpec,
    s_lo: CurveSample,
    s_hi: CurveSample,
    mu0: f64,
) -> Result<Crossing, String> {
    // Re-anchor at the bracket's left end; by uniqueness the state reached
    // by continuation in k equals the swept one.
    let (mut state, _) =
        continue_in_k(spec, s_lo.xi1).map_err(|e| format!("re-anchoring failed: {e}"))?;

    let (mut lo, mut f_lo) = (s_lo.xi1, s_lo.mu - mu0);
    let mut hi = s_hi.xi1;
    let (mut x_prev, mut f_prev) = (lo, f_lo);
    let (mut x_cur, mut f_cur) = (hi, s_hi.mu - mu0);

    for _ in 0..80 {
        // secant proposal, bisection fallback when it leaves the bracket
        let denom = f_cur - f_prev;
        let mut prop = if denom != 0.0 {
            x_cur - f_cur * (x_cur - x_prev) / denom
        } else {
            0.5 * (lo + hi)
        };
        if !(prop > lo && prop < hi) {
            prop = 0.5 * (lo + hi);
        }
        let predictor = shift_predictor(spec, &state, prop);
        let (next, report) = newton_solve(spec, 1.0, prop, &predictor)
            .map_err(|e| format!("refinement solve failed at ξ₁ = {prop}: {e}"))?;
        let f = next.mu - mu0;
        state = next;
        if f.abs() <= CROSSING_TOL {
            return Ok(Crossing { state, report });
        }
        if f_lo * f <= 0.0 {
            hi = prop;
        } else {
            lo = prop;
            f_lo = f;
        }
        x_prev = x_cur;
        f_prev = f_cur;
        x_cur = prop;
        f_cur = f;
        if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
            return Err(format!(
                "bracket collapsed at ξ₁ ≈ {lo} with |μ - μ₀| = {:.3e}",
                f_cur.abs()
            ));
        }
    }
    Err("refinement did not converge in 80 iterations".into())
}

/// Extremes, tail estimates, and an optional crossing count for one level.
#[derive(Debug, Clone)]
pub struct CurveSummary {
    /// `μ₋`: smallest sampled `μ` and its location.
    pub mu_minus: f64,
    pub mu_minus_at: f64,
    /// `μ₊`: largest sampled `μ` and its location.
    pub mu_plus: f64,
    pub mu_plus_at: f64,
    /// Mean of the last tenth of the samples on the low-`ξ₁` side.
    pub tail_lower: f64,
    /// Mean of the last tenth of the samples on the high-`ξ₁` side.
    pub tail_upper: f64,
    /// Quadrature means of the declared asymptotes, when available.
    pub expected_tails: Option<(f64, f64)>,
    /// `(level, crossing count)` when a level was queried.
    pub level_query: Option<(f64, usize)>,
}

/// Summarizes a curve with at least 10 samples.
pub fn curve_summary(
    curve: &ContinuationCurve,
    spec: &ProblemSpec,
    level: Option<f64>,
) -> Result<CurveSummary, ContinuationError> {
    let samples = &curve.samples;
    if samples.len() < 10 {
        return Err(ContinuationError::TooFewSamples {
            got: samples.len(),
            need: 10,
        });
    }
    let mut mu_minus = f64::INFINITY;
    let mut mu_minus_at = f64::NAN;
    let mut mu_plus = f64::NEG_INFINITY;
    let mut mu_plus_at = f64::NAN;
    for s in samples {
        if s.mu < mu_minus {
            mu_minus = s.mu;
            mu_minus_at = s.xi1;
        }
        if s.mu > mu_plus {
            mu_plus = s.mu;
            mu_plus_at = s.xi1;
        }
    }
    let tail_len = (samples.len() / 10).max(1);
    let tail_lower =
        samples[..tail_len].iter().map(|s| s.mu).sum::<f64>() / tail_len as f64;
    let tail_upper = samples[samples.len() - tail_len..]
        .iter()
        .map(|s| s.mu)
        .sum::<f64>()
        / tail_len as f64;
    let expected_tails = match crate::analysis::ll_window(&spec.g, &spec.mesh) {
        crate::analysis::LlWindow::Available { lower, upper }
            if spec.g.asymptotes().is_some() =>
        {
            Some((lower, upper))
        }
        _ => None,
    };
    Ok(CurveSummary {
        mu_minus,
        mu_minus_at,
        mu_plus,
        mu_plus_at,
        tail_lower,
        tail_upper,
        expected_tails,
        level_query: level.map(|l| (l, curve.crossing_count(l))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::model::{
        ContinuationControls, Forcing, Nonlinearity, SolverControls,
    };

    fn spec_with(
        g: Nonlinearity,
        theta_fn: impl Fn(f64) -> f64,
        mu0: f64,
        cc: ContinuationControls,
    ) -> ProblemSpec {
        let mesh = Mesh::interval(1.0, 100).unwrap();
        let theta: Vec<f64> = (0..mesh.interior_count())
            .map(|i| theta_fn(mesh.interior_coord(i).0))
            .collect();
        let forcing = Forcing::from_parts(&mesh, mu0, &theta).unwrap();
        ProblemSpec::new(mesh, g, forcing, SolverControls::default(), cc).unwrap()
    }

    #[test]
    fn k_march_constant_family() {
        // θ ≡ 0, g = tanh: u ≡ ξ₁ with μ = k·tanh(ξ₁) exactly at every k.
        let spec = spec_with(
            Nonlinearity::tanh(),
            |_| 0.0,
            0.0,
            ContinuationControls::default(),
        );
        let (state, trace) = continue_in_k(&spec, 1.0).unwrap();
        assert!((state.mu - 1.0f64.tanh()).abs() < 1e-9);
        for s in &trace {
            assert!((s.mu - s.k * 1.0f64.tanh()).abs() < 1e-9, "k = {}", s.k);
            assert!((s.b - 1.0).abs() < 1e-9);
        }
        assert!(trace.first().map(|t| t.k) == Some(0.0));
        assert!((trace.last().map(|t| t.k).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn k_march_linear_is_single_step() {
        let spec = spec_with(
            Nonlinearity::zero(),
            |x| (std::f64::consts::PI * x).cos(),
            0.0,
            ContinuationControls::default(),
        );
        let (state, trace) = continue_in_k(&spec, 0.3).unwrap();
        // g ≡ 0: every k-step converges on the first try from the k = 0
        // solution, and the state never moves.
        let (lin, _) = solve_linear_k0(&spec, 0.3).unwrap();
        for (a, b) in state.deviation.iter().zip(lin.deviation.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
        for s in &trace[1..] {
            assert_eq!(s.newton_iterations, 0, "k = {}", s.k);
        }
    }

    #[test]
    fn sweep_reproduces_tanh_closed_form() {
        let cc = ContinuationControls {
            xi_min: -5.0,
            xi_max: 5.0,
            xi_step: 0.1,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::tanh(), |_| 0.0, 0.0, cc);
        let curve = sweep_xi(&spec).unwrap();
        assert!(!curve.is_partial());
        curve.validate(0.1).unwrap();
        for s in &curve.samples {
            assert!(
                (s.mu - s.xi1.tanh()).abs() < 1e-9,
                "ξ₁ = {}: μ = {} vs {}",
                s.xi1,
                s.mu,
                s.xi1.tanh()
            );
        }
        assert!(curve.samples.first().unwrap().xi1 == -5.0);
        assert!(curve.samples.last().unwrap().xi1 == 5.0);
    }

    #[test]
    fn sweep_bump_summary_extremes() {
        let cc = ContinuationControls {
            xi_min: -6.0,
            xi_max: 6.0,
            xi_step: 0.01,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::gaussian_bump(), |_| 0.0, 0.0, cc);
        let curve = sweep_xi(&spec).unwrap();
        let summary = curve_summary(&curve, &spec, None).unwrap();
        let mu_star = 0.5f64.exp().recip() / 2.0f64.sqrt();
        let xi_star = 1.0 / 2.0f64.sqrt();
        assert!((summary.mu_plus - mu_star).abs() < 1e-4, "{}", summary.mu_plus);
        assert!((summary.mu_plus_at - xi_star).abs() < 2e-2);
        assert!((summary.mu_minus + mu_star).abs() < 1e-4);
        assert!(summary.tail_lower.abs() < 1e-6);
        assert!(summary.tail_upper.abs() < 1e-6);
        assert_eq!(summary.expected_tails, Some((0.0, 0.0)));
    }

    #[test]
    fn trace_finds_single_tanh_crossing() {
        let cc = ContinuationControls {
            xi_min: -5.0,
            xi_max: 5.0,
            xi_step: 0.1,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::tanh(), |_| 0.0, 0.5, cc);
        let curve = sweep_xi(&spec).unwrap();
        let outcome = trace_mu_crossings(&curve, &spec, 0.5);
        assert_eq!(outcome.crossings.len(), 1);
        assert!(outcome.failures.is_empty());
        let root = &outcome.crossings[0].state;
        let expect = 0.5f64.atanh();
        assert!((root.xi1 - expect).abs() < 1e-8, "{}", root.xi1);
        assert!((root.mu - 0.5).abs() <= 1e-10);
        let d = diagnose(&spec, root).unwrap();
        assert!(d.within(spec.solver.tolerance), "{d:?}");
    }

    #[test]
    fn trace_level_outside_window_is_empty() {
        let cc = ContinuationControls {
            xi_min: -5.0,
            xi_max: 5.0,
            xi_step: 0.1,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::tanh(), |_| 0.0, 1.5, cc);
        let curve = sweep_xi(&spec).unwrap();
        let outcome = trace_mu_crossings(&curve, &spec, 1.5);
        assert!(outcome.crossings.is_empty());
        assert!(outcome.grazings.is_empty());
    }

    #[test]
    fn trace_bump_two_crossings_match_scalar_roots() {
        let cc = ContinuationControls {
            xi_min: -6.0,
            xi_max: 6.0,
            xi_step: 0.05,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::gaussian_bump(), |_| 0.0, 0.2, cc);
        let curve = sweep_xi(&spec).unwrap();
        let outcome = trace_mu_crossings(&curve, &spec, 0.2);
        assert_eq!(outcome.crossings.len(), 2, "{:?}", outcome.grazings);

        // scalar bisection oracle on ξ e^(-ξ²) = 0.2
        let f = |x: f64| x * (-x * x).exp() - 0.2;
        let bisect = |mut lo: f64, mut hi: f64| -> f64 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(lo) * f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        let r1 = bisect(0.0, inv_sqrt2);
        let r2 = bisect(inv_sqrt2, 6.0);
        let mut roots: Vec<f64> = outcome.crossings.iter().map(|c| c.state.xi1).collect();
        roots.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        assert!((roots[0] - r1).abs() < 1e-4, "{} vs {r1}", roots[0]);
        assert!((roots[1] - r2).abs() < 1e-4, "{} vs {r2}", roots[1]);
        assert!(roots[0] < inv_sqrt2 && inv_sqrt2 < roots[1]);
    }

    #[test]
    fn grazing_reported_at_touching_level() {
        // level exactly at the sampled maximum of the bump curve
        let cc = ContinuationControls {
            xi_min: -3.0,
            xi_max: 3.0,
            xi_step: 0.05,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::gaussian_bump(), |_| 0.0, 0.0, cc);
        let curve = sweep_xi(&spec).unwrap();
        let mu_max = curve
            .samples
            .iter()
            .map(|s| s.mu)
            .fold(f64::NEG_INFINITY, f64::max);
        // a level just above the sampled maximum: near-touch, no sign change
        let outcome = trace_mu_crossings(&curve, &spec, mu_max + 1e-9);
        assert!(
            !outcome.grazings.is_empty(),
            "expected a grazing report just above the sampled maximum"
        );
        assert!(outcome.crossings.is_empty());
    }

    #[test]
    fn path_independence_between_anchors() {
        let make = |anchor: Option<f64>| {
            let cc = ContinuationControls {
                xi_min: -2.0,
                xi_max: 2.0,
                xi_step: 0.1,
                anchor,
                ..Default::default()
            };
            spec_with(
                Nonlinearity::tanh(),
                |x| 0.1 * (std::f64::consts::PI * x).cos(),
                0.0,
                cc,
            )
        };
        let c1 = sweep_xi(&make(None)).unwrap();
        let c2 = sweep_xi(&make(Some(-1.5))).unwrap();
        for s1 in c1.samples.iter().step_by(5) {
            let s2 = c2
                .samples
                .iter()
                .min_by(|a, b| {
                    (a.xi1 - s1.xi1)
                        .abs()
                        .partial_cmp(&(b.xi1 - s1.xi1).abs())
                        .expect("finite")
                })
                .unwrap();
            if (s2.xi1 - s1.xi1).abs() < 1e-9 {
                assert!(
                    (s2.mu - s1.mu).abs() < 1e-8 && (s2.b - s1.b).abs() < 1e-8,
                    "anchors disagree at ξ₁ = {}",
                    s1.xi1
                );
            }
        }
    }

    #[test]
    fn snapshots_captured_at_requested_points() {
        let cc = ContinuationControls {
            xi_min: -1.0,
            xi_max: 1.0,
            xi_step: 0.25,
            snapshot_xis: vec![-0.7, 0.0, 0.6],
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::tanh(), |_| 0.0, 0.0, cc);
        let curve = sweep_xi(&spec).unwrap();
        let xs: Vec<f64> = curve.snapshots.iter().map(|(x, _)| *x).collect();
        assert_eq!(xs.len(), 3, "{xs:?}");
        assert!((xs[0] + 0.7).abs() < 1e-12);
        assert!(xs[1].abs() < 1e-12);
        assert!((xs[2] - 0.6).abs() < 1e-12);
        curve.validate(0.25).unwrap();
    }

    #[test]
    fn sup_norm_flattens_for_bounded_g() {
        let cc = ContinuationControls {
            xi_min: -30.0,
            xi_max: 30.0,
            xi_step: 0.5,
            ..Default::default()
        };
        let spec = spec_with(
            Nonlinearity::tanh(),
            |x| 0.1 * (std::f64::consts::PI * x).cos(),
            0.0,
            cc,
        );
        let curve = sweep_xi(&spec).unwrap();
        let at = |xi: f64| -> f64 {
            curve
                .samples
                .iter()
                .min_by(|a, b| {
                    (a.xi1 - xi)
                        .abs()
                        .partial_cmp(&(b.xi1 - xi).abs())
                        .expect("finite")
                })
                .unwrap()
                .sup_norm_u
        };
        for (a, b) in [(20.0, 30.0), (-20.0, -30.0)] {
            let ratio = at(a).max(at(b)) / at(a).min(at(b)).max(1e-300);
            assert!(ratio < 2.0, "sup-norm ratio {ratio} between {a} and {b}");
        }
        // tails approach the asymptote means
        let summary = curve_summary(&curve, &spec, None).unwrap();
        assert!((summary.tail_upper - 1.0).abs() < 0.02, "{}", summary.tail_upper);
        assert!((summary.tail_lower + 1.0).abs() < 0.02, "{}", summary.tail_lower);
    }

    #[test]
    fn stall_produces_partial_curve() {
        // M = 15 ≫ π²: the bordered operator passes through a singular point
        // as k grows, so either the k-march stalls (anchor error) or the
        // sweep hits it and records a stall.
        let cc = ContinuationControls {
            xi_min: -1.0,
            xi_max: 1.0,
            xi_step: 0.1,
            ..Default::default()
        };
        let spec = spec_with(
            Nonlinearity::modulated_tanh(crate::model::SpatialFn::Constant(15.0)),
            |x| 0.1 * (std::f64::consts::PI * x).cos(),
            0.0,
            cc,
        );
        match sweep_xi(&spec) {
            Ok(curve) => {
                // every accepted sample still satisfies the invariants
                assert!(curve.validate(0.1).is_ok() || curve.is_partial());
            }
            Err(ContinuationError::Stalled { last_k, report, .. }) => {
                assert!(last_k < 1.0);
                assert!(!report.satisfied, "stall without hypothesis violation");
            }
            Err(other) => panic!("unclassified failure: {other}"),
        }
    }

    #[test]
    fn summary_requires_ten_samples() {
        let cc = ContinuationControls {
            xi_min: -0.2,
            xi_max: 0.2,
            xi_step: 0.2,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::tanh(), |_| 0.0, 0.0, cc);
        let curve = sweep_xi(&spec).unwrap();
        assert!(matches!(
            curve_summary(&curve, &spec, None),
            Err(ContinuationError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn constant_curve_for_zero_g() {
        let cc = ContinuationControls {
            xi_min: -2.0,
            xi_max: 2.0,
            xi_step: 0.2,
            ..Default::default()
        };
        let spec = spec_with(Nonlinearity::zero(), |_| 0.0, 0.0, cc);
        let curve = sweep_xi(&spec).unwrap();
        let summary = curve_summary(&curve, &spec, Some(0.0)).unwrap();
        assert!(summary.mu_minus.abs() < 1e-10);
        assert!(summary.mu_plus.abs() < 1e-10);
    }
}
