//! Newton solves of the augmented system at fixed homotopy level `k` and
//! fixed average `ξ₁`: find the triple `(u, b, μ)` with
//!
//! ```text
//!   Δ_h u + k g(x, u) = μ + θ      (interior rows)
//!   boundary_flux(u, b) = 0        (flux row)
//!   average(u) = ξ₁                (average row)
//! ```
//!
//! Unknown ordering is `[u; b; μ]`, equation ordering interior/flux/average;
//! the ordering is fixed so factorizations are reproducible.

use crate::expr::ExprError;
use crate::linalg::{lu_factor, BorderedMatrix, LinalgError, SparseMatrix};
use crate::model::ProblemSpec;
use crate::rng::SplitMix64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("bordered Jacobian is singular: {0}")]
    Singular(LinalgError),
    #[error("Newton diverged: residual {residual:.3e} from initial {initial:.3e}")]
    Divergence { residual: f64, initial: f64 },
    #[error("non-finite value while evaluating {what}")]
    NonFinite { what: &'static str },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for SolverError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Singular { .. } => SolverError::Singular(e),
            other => SolverError::Linalg(other),
        }
    }
}

/// The unknown triple at a given `(k, ξ₁)`.
///
/// The state is stored in deviation form, `u = ξ₁ + U` and `b = ξ₁ + B`:
/// `U` stays order-one for every `ξ₁` (the solution deviation is bounded
/// uniformly in the average), so residual evaluation keeps full precision
/// even at large averages, where storing `u` itself would quantize the
/// stencil at `ulp(ξ₁)/h²` and stop Newton above the tolerance.
#[derive(Debug, Clone)]
pub struct AugmentedState {
    /// Deviation `U = u - ξ₁` at the interior nodes.
    pub deviation: Vec<f64>,
    /// Boundary offset `B = b - ξ₁`.
    pub boundary_offset: f64,
    /// Multiplier (mean part of the forcing).
    pub mu: f64,
    pub k: f64,
    pub xi1: f64,
}

impl AugmentedState {
    /// Spatially constant state `u ≡ ξ₁`, `b = ξ₁`, `μ = 0`.
    pub fn constant(spec: &ProblemSpec, k: f64, xi1: f64) -> AugmentedState {
        AugmentedState {
            deviation: vec![0.0; spec.mesh.interior_count()],
            boundary_offset: 0.0,
            mu: 0.0,
            k,
            xi1,
        }
    }

    /// Builds a state from nodal values of `u` and the boundary value `b`.
    pub fn from_field(u: &[f64], b: f64, mu: f64, k: f64, xi1: f64) -> AugmentedState {
        AugmentedState {
            deviation: u.iter().map(|v| v - xi1).collect(),
            boundary_offset: b - xi1,
            mu,
            k,
            xi1,
        }
    }

    /// Value of `u` at interior node `i`.
    pub fn u_at(&self, i: usize) -> f64 {
        self.xi1 + self.deviation[i]
    }

    /// Materialized nodal values of `u`.
    pub fn u_values(&self) -> Vec<f64> {
        self.deviation.iter().map(|d| self.xi1 + d).collect()
    }

    /// Boundary value `b`.
    pub fn b(&self) -> f64 {
        self.xi1 + self.boundary_offset
    }

    /// `‖u - ξ₁‖_∞` over the interior nodes and the boundary value.
    pub fn sup_norm_deviation(&self) -> f64 {
        self.deviation
            .iter()
            .map(|v| v.abs())
            .fold(self.boundary_offset.abs(), f64::max)
    }

    fn pack(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.deviation.len() + 2);
        z.extend_from_slice(&self.deviation);
        z.push(self.boundary_offset);
        z.push(self.mu);
        z
    }

    fn unpack(&mut self, z: &[f64]) {
        let n = self.deviation.len();
        self.deviation.copy_from_slice(&z[..n]);
        self.boundary_offset = z[n];
        self.mu = z[n + 1];
    }
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone, Copy)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    pub condition_estimate: f64,
    pub converged: bool,
}

/// Residual of the augmented system, length `N + 2`. Evaluated in deviation
/// form: `Δ_h U + k g(x, ξ₁ + U) - μ - θ`, flux of `(U, B)`, and
/// `average(U)` (equal to `average(u) - ξ₁` for the exact weights).
pub fn residual(spec: &ProblemSpec, state: &AugmentedState) -> Result<Vec<f64>, SolverError> {
    let mesh = &spec.mesh;
    let n = mesh.interior_count();
    let lap = mesh.apply_laplacian(&state.deviation, state.boundary_offset)?;
    let theta = spec.forcing.theta();
    let mut r = Vec::with_capacity(n + 2);
    for i in 0..n {
        let (x, y) = mesh.interior_coord(i);
        let g = spec.g.eval(x, y, state.u_at(i))?;
        let v = lap[i] + state.k * g - state.mu - theta[i];
        if !v.is_finite() {
            return Err(SolverError::NonFinite { what: "interior residual" });
        }
        r.push(v);
    }
    r.push(mesh.boundary_flux(&state.deviation, state.boundary_offset)?);
    r.push(mesh.average(&state.deviation)?);
    Ok(r)
}

/// Bordered Jacobian of [`residual`] at `state`.
pub fn jacobian(spec: &ProblemSpec, state: &AugmentedState) -> Result<BorderedMatrix, SolverError> {
    let mesh = &spec.mesh;
    let n = mesh.interior_count();
    let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(5 * n);
    let mut b_column = vec![0.0f64; n];
    let mut stencil = Vec::new();
    for i in 0..n {
        let bcoef = mesh.interior_stencil(i, &mut stencil);
        b_column[i] = bcoef;
        for &(j, c) in &stencil {
            trips.push((i, j, c));
        }
        let (x, y) = mesh.interior_coord(i);
        let gu = spec.g.eval_du(x, y, state.u_at(i))?;
        if !gu.is_finite() {
            return Err(SolverError::NonFinite { what: "g_u" });
        }
        trips.push((i, i, state.k * gu));
    }
    let interior = SparseMatrix::from_triplets(n, n, &trips)?;
    let (flux_row, flux_b) = mesh.flux_row();
    let vol = mesh.volume();
    let average_row: Vec<f64> = mesh.weights().iter().map(|w| w / vol).collect();
    Ok(BorderedMatrix {
        interior,
        b_column,
        mu_column: vec![-1.0; n],
        flux_row,
        average_row,
        // average row does not touch b (interior quadrature only), and
        // neither constraint involves μ.
        corner: [[flux_b, 0.0], [0.0, 0.0]],
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|t| t.abs()).fold(0.0, f64::max)
}

/// Damped full-step Newton iteration from `initial`.
///
/// The step is halved up to six times when the residual norm fails to
/// decrease; classified errors are max-iteration, singular Jacobian, and
/// divergence (residual beyond `10⁶` times the initial one).
pub fn newton_solve(
    spec: &ProblemSpec,
    k: f64,
    xi1: f64,
    initial: &AugmentedState,
) -> Result<(AugmentedState, NewtonReport), SolverError> {
    let mut state = initial.clone();
    if state.xi1 != xi1 {
        // re-express the deviation about the new average
        let shift = state.xi1 - xi1;
        state.deviation.iter_mut().for_each(|d| *d += shift);
        state.boundary_offset += shift;
        state.xi1 = xi1;
    }
    state.k = k;
    if !state.deviation.iter().all(|v| v.is_finite())
        || !state.boundary_offset.is_finite()
        || !state.mu.is_finite()
    {
        return Err(SolverError::NonFinite { what: "initial state" });
    }

    let tol = spec.solver.tolerance;
    let mut r = residual(spec, &state)?;
    let mut rnorm = inf_norm(&r);
    let initial_norm = rnorm;
    let mut cond = f64::NAN;

    for iter in 0..=spec.solver.max_iterations {
        if rnorm <= tol {
            if cond.is_nan() {
                // converged at entry: factor once so the report still
                // carries a condition estimate for the monitors
                let full = jacobian(spec, &state)?.assemble_full()?;
                cond = lu_factor(&full)?.condition_estimate();
            }
            return Ok((
                state,
                NewtonReport {
                    iterations: iter,
                    residual: rnorm,
                    condition_estimate: cond,
                    converged: true,
                },
            ));
        }
        if iter == spec.solver.max_iterations {
            break;
        }
        if rnorm > 1e6 * initial_norm.max(1.0) {
            return Err(SolverError::Divergence {
                residual: rnorm,
                initial: initial_norm,
            });
        }

        let full = jacobian(spec, &state)?.assemble_full()?;
        let factors = lu_factor(&full)?;
        cond = factors.condition_estimate();
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = factors.solve(&neg_r)?;

        let z = state.pack();
        let mut alpha = 1.0f64;
        let mut accepted = false;
        for _ in 0..=6 {
            let trial: Vec<f64> = z
                .iter()
                .zip(step.iter())
                .map(|(zi, si)| zi + alpha * si)
                .collect();
            let mut trial_state = state.clone();
            trial_state.unpack(&trial);
            match residual(spec, &trial_state) {
                Ok(tr) => {
                    let tnorm = inf_norm(&tr);
                    if tnorm < rnorm || alpha <= 1.0 / 64.0 {
                        state = trial_state;
                        r = tr;
                        rnorm = tnorm;
                        accepted = true;
                        break;
                    }
                }
                Err(SolverError::Expr(_)) | Err(SolverError::NonFinite { .. }) => {
                    // step left the domain of g; fall through to halving
                }
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(SolverError::Divergence {
                residual: rnorm,
                initial: initial_norm,
            });
        }
    }
    Err(SolverError::MaxIterations {
        iterations: spec.solver.max_iterations,
        residual: rnorm,
    })
}

/// Solves the linear problem at `k = 0` (one bordered solve): `Δ_h u = μ + θ`
/// with zero flux and average `ξ₁`. Since `Σ w θ = 0` exactly, the resulting
/// multiplier vanishes to the solver tolerance.
pub fn solve_linear_k0(
    spec: &ProblemSpec,
    xi1: f64,
) -> Result<(AugmentedState, NewtonReport), SolverError> {
    newton_solve(spec, 0.0, xi1, &AugmentedState::constant(spec, 0.0, xi1))
}

/// Residual magnitudes of the four converged-state invariants.
#[derive(Debug, Clone, Copy)]
pub struct StateDiagnostics {
    /// `max_i |Δ_h u + k g - μ - θ|`
    pub interior_residual: f64,
    /// `|boundary_flux(u, b)|`
    pub flux: f64,
    /// `|average(u) - ξ₁|`
    pub average_error: f64,
    /// `|μ - (k/|D|_h) Σ w g(x, u)|`
    pub mean_balance_error: f64,
}

impl StateDiagnostics {
    /// All four magnitudes within the stated multiples of `tol`.
    pub fn within(&self, tol: f64) -> bool {
        self.interior_residual <= tol
            && self.flux <= tol
            && self.average_error <= tol
            && self.mean_balance_error <= 2.0 * tol
    }
}

/// Evaluates the four [`AugmentedState`] invariants at `state`.
pub fn diagnose(spec: &ProblemSpec, state: &AugmentedState) -> Result<StateDiagnostics, SolverError> {
    let r = residual(spec, state)?;
    let n = spec.mesh.interior_count();
    let interior_residual = inf_norm(&r[..n]);
    let flux = r[n].abs();
    let average_error = r[n + 1].abs();
    let mut g_sum = 0.0;
    for i in 0..n {
        let (x, y) = spec.mesh.interior_coord(i);
        g_sum += spec.mesh.weights()[i] * spec.g.eval(x, y, state.u_at(i))?;
    }
    let balance = state.k * g_sum / spec.mesh.volume();
    Ok(StateDiagnostics {
        interior_residual,
        flux,
        average_error,
        mean_balance_error: (state.mu - balance).abs(),
    })
}

/// Compares the assembled Jacobian against central finite differences of the
/// residual along `directions` random directions; returns the worst relative
/// discrepancy `‖Jd - FD‖_∞ / (1 + ‖Jd‖_∞)`.
pub fn verify_jacobian(
    spec: &ProblemSpec,
    state: &AugmentedState,
    directions: usize,
    seed: u64,
) -> Result<f64, SolverError> {
    let full = jacobian(spec, state)?.assemble_full()?;
    let n = full.nrows();
    let mut rng = SplitMix64::new(seed);
    let z = state.pack();
    let eps = 1e-6 * (1.0 + inf_norm(&z));
    let mut worst = 0.0f64;
    for _ in 0..directions {
        let d = rng.vector_in(n, -1.0, 1.0);
        let mut jd = vec![0.0; n];
        full.matvec(&d, &mut jd);
        let mut plus = state.clone();
        let mut minus = state.clone();
        let zp: Vec<f64> = z.iter().zip(d.iter()).map(|(a, b)| a + eps * b).collect();
        let zm: Vec<f64> = z.iter().zip(d.iter()).map(|(a, b)| a - eps * b).collect();
        plus.unpack(&zp);
        minus.unpack(&zm);
        let rp = residual(spec, &plus)?;
        let rm = residual(spec, &minus)?;
        let gap = (0..n)
            .map(|i| ((rp[i] - rm[i]) / (2.0 * eps) - jd[i]).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(gap / (1.0 + inf_norm(&jd)));
    }
    Ok(worst)
}
