//! Solver for the free boundary value problem
//!
//! ```text
//!   Δu + g(x,u) = p(x)   in D,
//!   u = b on ∂D,         ∮_∂D ∂u/∂n ds = 0,
//! ```
//!
//! where both the field `u` and the boundary constant `b` are unknown. The
//! forcing is split into its mean and a zero-mean part, `p = μ₀ + θ`, and
//! the problem is solved by two continuations: a homotopy in `k` from the
//! linear problem `Δu = μ + θ` to the full nonlinearity at fixed solution
//! average `ξ₁`, then a sweep in `ξ₁` that traces the curve `μ(ξ₁)` and
//! locates every crossing `μ(ξ₁) = μ₀`. Each crossing is a solution of the
//! original problem.
//!
//! The crate also verifies the solvability hypotheses numerically: the
//! constrained Poincaré constant `c₀`, the second Dirichlet eigenvalue
//! `λ₂`, the derivative bound `M` with `M < min(c₀, λ₂)`, and the resonance
//! window for `μ₀` spanned by the means of `g(x, ±∞)`.

pub mod analysis;
pub mod cli;
pub mod continuation;
pub mod expr;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod rng;
pub mod solver;

pub use analysis::{check_hypotheses, ll_window, HypothesisReport, LlWindow, MuVerdict};
pub use continuation::{
    continue_in_k, curve_summary, sweep_xi, trace_mu_crossings, ContinuationCurve,
    ContinuationError, CurveSample, CurveSummary, TraceOutcome,
};
pub use expr::{Expr, ExprError};
pub use mesh::{Mesh, MeshError};
pub use model::{estimate_m, Forcing, ModelError, Nonlinearity, ProblemSpec};
pub use solver::{newton_solve, solve_linear_k0, AugmentedState, NewtonReport, SolverError};
