//! Numerical verification of the solvability hypotheses: the constrained
//! Poincaré constant `c₀`, the Dirichlet eigenvalues, the derivative bound
//! `M` with the condition `M < min(c₀, λ₂)`, and the resonance window for
//! `μ₀` spanned by the quadrature means of `g(x, ±∞)`.

use crate::linalg::{eig_c0, eig_smallest_dirichlet, LinalgError};
use crate::mesh::Mesh;
use crate::model::{estimate_m, Nonlinearity, ProblemSpec};
use serde::Serialize;
use std::fmt;
use thiserror::Error;

/// Sampling box and density used when no derivative bound is declared.
const M_SAMPLE_BOX: (f64, f64) = (-20.0, 20.0);
const M_SAMPLES: usize = 256;
/// Far probes must agree this closely for a limit to count as detected.
const PROBE_AGREEMENT: f64 = 1e-4;
/// Window narrower than this is reported as degenerate.
const DEGENERATE_WIDTH: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Eigensolver(#[from] LinalgError),
}

/// Resonance window `( mean g(x,-∞), mean g(x,+∞) )` for the forcing mean.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum LlWindow {
    Available { lower: f64, upper: f64 },
    Unavailable { reason: String },
}

impl LlWindow {
    pub fn is_degenerate(&self) -> bool {
        match self {
            LlWindow::Available { lower, upper } => (upper - lower).abs() <= DEGENERATE_WIDTH,
            LlWindow::Unavailable { .. } => false,
        }
    }
}

/// Placement of `μ₀` relative to the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MuVerdict {
    /// Strictly inside; the necessary condition for solvability holds.
    Inside,
    /// On or outside the boundary; no solution exists when the strict
    /// two-sided bound on `g` holds.
    Outside,
    /// Window has zero width, so the strict bound cannot hold and the
    /// necessity test does not apply.
    Degenerate,
    Unavailable,
}

/// Numerical evidence for the solvability hypotheses of one problem.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub c0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Bound on `|g_u|`: declared, or sampled (`m_declared = false`, then a
    /// lower estimate of the true supremum).
    pub m_bound: f64,
    pub m_declared: bool,
    /// `M < min(c₀, λ₂)`.
    pub satisfied: bool,
    pub window: LlWindow,
    pub mu0: f64,
    pub verdict: MuVerdict,
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hypothesis report")?;
        writeln!(f, "  c0       = {:.12}  (discrete estimate)", self.c0)?;
        writeln!(f, "  lambda1  = {:.12}", self.lambda1)?;
        writeln!(f, "  lambda2  = {:.12}", self.lambda2)?;
        writeln!(
            f,
            "  M        = {:.12}  ({})",
            self.m_bound,
            if self.m_declared { "declared" } else { "estimated" }
        )?;
        writeln!(
            f,
            "  M < min(c0, lambda2): {}",
            if self.satisfied { "satisfied" } else { "VIOLATED" }
        )?;
        match &self.window {
            LlWindow::Available { lower, upper } => {
                writeln!(f, "  window   = ({lower:.12}, {upper:.12})")?;
            }
            LlWindow::Unavailable { reason } => {
                writeln!(f, "  window   = unavailable: {reason}")?;
            }
        }
        write!(f, "  mu0      = {:.12}: ", self.mu0)?;
        match self.verdict {
            MuVerdict::Inside => write!(f, "inside the window"),
            MuVerdict::Outside => write!(f, "outside the window: no solution exists"),
            MuVerdict::Degenerate => write!(f, "window degenerate, necessity test inapplicable"),
            MuVerdict::Unavailable => write!(f, "window unavailable"),
        }
    }
}

/// Quadrature means of the asymptotes `g(x, ±∞)` over the interior nodes.
///
/// Declared asymptotes are used when present; otherwise the limits are
/// probed at `u = ±10³` and `±10⁶` and must agree pointwise within `1e-4`.
pub fn ll_window(g: &Nonlinearity, mesh: &Mesh) -> LlWindow {
    let mean_of = |f: &dyn Fn(f64, f64) -> Result<f64, String>| -> Result<f64, String> {
        let mut acc = 0.0;
        for (idx, w) in mesh.weights().iter().enumerate() {
            let (x, y) = mesh.interior_coord(idx);
            acc += w * f(x, y)?;
        }
        Ok(acc / mesh.volume())
    };

    if let Some((minus, plus)) = g.asymptotes() {
        let lo = mean_of(&|x, y| minus.eval(x, y).map_err(|e| e.to_string()));
        let hi = mean_of(&|x, y| plus.eval(x, y).map_err(|e| e.to_string()));
        return match (lo, hi) {
            (Ok(lower), Ok(upper)) => LlWindow::Available { lower, upper },
            (Err(reason), _) | (_, Err(reason)) => LlWindow::Unavailable { reason },
        };
    }

    for sign in [-1.0, 1.0] {
        for idx in 0..mesh.interior_count() {
            let (x, y) = mesh.interior_coord(idx);
            let near = g.eval(x, y, sign * 1e3);
            let far = g.eval(x, y, sign * 1e6);
            match (near, far) {
                (Ok(a), Ok(b)) => {
                    if (a - b).abs() > PROBE_AGREEMENT {
                        return LlWindow::Unavailable {
                            reason: format!(
                                "probes g(x, {:e}) and g(x, {:e}) disagree by {:.3e} at x = {x}",
                                sign * 1e3,
                                sign * 1e6,
                                (a - b).abs()
                            ),
                        };
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    return LlWindow::Unavailable {
                        reason: format!("probe failed: {e}"),
                    }
                }
            }
        }
    }
    let lo = mean_of(&|x, y| g.eval(x, y, -1e6).map_err(|e| e.to_string()));
    let hi = mean_of(&|x, y| g.eval(x, y, 1e6).map_err(|e| e.to_string()));
    match (lo, hi) {
        (Ok(lower), Ok(upper)) => LlWindow::Available { lower, upper },
        (Err(reason), _) | (_, Err(reason)) => LlWindow::Unavailable { reason },
    }
}

/// Places `μ₀` relative to the window (strict inequalities).
pub fn verdict_for(window: &LlWindow, mu0: f64) -> MuVerdict {
    match window {
        LlWindow::Unavailable { .. } => MuVerdict::Unavailable,
        LlWindow::Available { lower, upper } => {
            if window.is_degenerate() {
                MuVerdict::Degenerate
            } else if *lower < mu0 && mu0 < *upper {
                MuVerdict::Inside
            } else {
                MuVerdict::Outside
            }
        }
    }
}

/// Aggregates the eigenvalue estimates, the derivative bound, and the
/// window verdict for the problem's `μ₀`. Deterministic: the eigensolver
/// seeds are fixed, so identical specs produce bitwise identical reports.
pub fn check_hypotheses(spec: &ProblemSpec) -> Result<HypothesisReport, AnalysisError> {
    let pairs = eig_smallest_dirichlet(&spec.mesh, 2)?;
    let c0 = eig_c0(&spec.mesh)?;
    let m_declared = spec.g.declared_bound().is_some();
    let m_bound = estimate_m(&spec.g, &spec.mesh, M_SAMPLE_BOX, M_SAMPLES);
    let window = ll_window(&spec.g, &spec.mesh);
    let mu0 = spec.forcing.mu0();
    let verdict = verdict_for(&window, mu0);
    Ok(HypothesisReport {
        c0,
        lambda1: pairs[0].value,
        lambda2: pairs[1].value,
        m_bound,
        m_declared,
        satisfied: m_bound < c0.min(pairs[1].value),
        window,
        mu0,
        verdict,
    })
}
