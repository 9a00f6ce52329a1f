//! Problem definition: the nonlinearity `g(x, u)`, the forcing decomposition
//! `p = μ₀ + θ` with exact discrete deflation, and the assembled problem
//! specification consumed by the solver and the continuation engine.

use crate::expr::{Expr, ExprError, Var};
use crate::mesh::{Mesh, MeshError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("non-finite forcing sample at interior node {index}")]
    NonFiniteSample { index: usize },
    #[error("expression `{source_text}` uses y on a one-dimensional mesh")]
    YOnInterval { source_text: String },
    #[error("declared derivative bound {declared} exceeded: |g_u| = {observed} at (x={x}, u={u})")]
    BoundExceeded {
        declared: f64,
        observed: f64,
        x: f64,
        u: f64,
    },
    #[error("declared asymptote {declared} disagrees with g(x, {probe}) = {observed} at x = {x}")]
    AsymptoteMismatch {
        declared: f64,
        observed: f64,
        probe: f64,
        x: f64,
    },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

/// A function of `x` (and `y` in 2D) used for asymptote declarations and for
/// the amplitude of the modulated catalog nonlinearity.
#[derive(Debug, Clone)]
pub enum SpatialFn {
    Constant(f64),
    Expr(Expr),
}

impl SpatialFn {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        match self {
            SpatialFn::Constant(c) => Ok(*c),
            SpatialFn::Expr(e) => e.eval(x, y, 0.0),
        }
    }

    fn describe(&self) -> String {
        match self {
            SpatialFn::Constant(c) => format!("{c}"),
            SpatialFn::Expr(e) => e.source().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
enum GKind {
    /// `tanh(u)`
    Tanh,
    /// `u · exp(-u²)`
    GaussianBump,
    /// `a(x) · tanh(u)`
    ModulatedTanh(SpatialFn),
    /// arbitrary parsed expression
    Expr(Expr),
}

/// Nonlinearity `g(x, u)` with its exact `u`-derivative, an optional declared
/// derivative bound `M`, and optional declared asymptotes `g(x, ±∞)`.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    kind: GKind,
    declared_bound: Option<f64>,
    asymptotes: Option<(SpatialFn, SpatialFn)>,
}

impl Nonlinearity {
    /// Catalog entry `g(u) = tanh(u)`, with `M = 1` and asymptotes `∓1`.
    pub fn tanh() -> Nonlinearity {
        Nonlinearity {
            kind: GKind::Tanh,
            declared_bound: Some(1.0),
            asymptotes: Some((SpatialFn::Constant(-1.0), SpatialFn::Constant(1.0))),
        }
    }

    /// Catalog entry `g(u) = u·exp(-u²)`, with asymptotes `0` on both sides.
    pub fn gaussian_bump() -> Nonlinearity {
        Nonlinearity {
            kind: GKind::GaussianBump,
            declared_bound: None,
            asymptotes: Some((SpatialFn::Constant(0.0), SpatialFn::Constant(0.0))),
        }
    }

    /// Catalog entry `g(x, u) = a(x)·tanh(u)`.
    pub fn modulated_tanh(amplitude: SpatialFn) -> Nonlinearity {
        let asym = (
            match &amplitude {
                SpatialFn::Constant(c) => SpatialFn::Constant(-c),
                SpatialFn::Expr(e) => {
                    let negated = Expr::parse(&format!("-({})", e.source()))
                        .expect("negating a parsed expression");
                    SpatialFn::Expr(negated)
                }
            },
            amplitude.clone(),
        );
        Nonlinearity {
            kind: GKind::ModulatedTanh(amplitude),
            declared_bound: None,
            asymptotes: Some(asym),
        }
    }

    /// Wraps a parsed expression. The expression must be differentiable in
    /// `u` (no `abs` around `u`-dependent subexpressions).
    pub fn from_expr(e: Expr) -> Result<Nonlinearity, ModelError> {
        e.ensure_differentiable_u()?;
        Ok(Nonlinearity {
            kind: GKind::Expr(e),
            declared_bound: None,
            asymptotes: None,
        })
    }

    /// Identically zero nonlinearity (the linear problem).
    pub fn zero() -> Nonlinearity {
        Nonlinearity {
            kind: GKind::Expr(Expr::parse("0").expect("constant")),
            declared_bound: Some(0.0),
            asymptotes: Some((SpatialFn::Constant(0.0), SpatialFn::Constant(0.0))),
        }
    }

    pub fn with_declared_bound(mut self, m: f64) -> Nonlinearity {
        self.declared_bound = Some(m);
        self
    }

    pub fn with_asymptotes(mut self, minus: SpatialFn, plus: SpatialFn) -> Nonlinearity {
        self.asymptotes = Some((minus, plus));
        self
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    pub fn asymptotes(&self) -> Option<(&SpatialFn, &SpatialFn)> {
        self.asymptotes.as_ref().map(|(a, b)| (a, b))
    }

    /// Short description for reports and hashing.
    pub fn describe(&self) -> String {
        match &self.kind {
            GKind::Tanh => "tanh(u)".into(),
            GKind::GaussianBump => "u*exp(-u^2)".into(),
            GKind::ModulatedTanh(a) => format!("({})*tanh(u)", a.describe()),
            GKind::Expr(e) => e.source().to_string(),
        }
    }

    pub fn uses_y(&self) -> bool {
        match &self.kind {
            GKind::Tanh | GKind::GaussianBump => false,
            GKind::ModulatedTanh(SpatialFn::Expr(e)) => e.uses_var(Var::Y),
            GKind::ModulatedTanh(SpatialFn::Constant(_)) => false,
            GKind::Expr(e) => e.uses_var(Var::Y),
        }
    }

    /// `g(x, u)`.
    pub fn eval(&self, x: f64, y: f64, u: f64) -> Result<f64, ExprError> {
        match &self.kind {
            GKind::Tanh => Ok(u.tanh()),
            GKind::GaussianBump => Ok(u * (-u * u).exp()),
            GKind::ModulatedTanh(a) => Ok(a.eval(x, y)? * u.tanh()),
            GKind::Expr(e) => e.eval(x, y, u),
        }
    }

    /// `∂g/∂u (x, u)`.
    pub fn eval_du(&self, x: f64, y: f64, u: f64) -> Result<f64, ExprError> {
        match &self.kind {
            GKind::Tanh => {
                let t = u.tanh();
                Ok(1.0 - t * t)
            }
            GKind::GaussianBump => Ok((1.0 - 2.0 * u * u) * (-u * u).exp()),
            GKind::ModulatedTanh(a) => {
                let t = u.tanh();
                Ok(a.eval(x, y)? * (1.0 - t * t))
            }
            GKind::Expr(e) => Ok(e.eval_du(x, y, u)?.1),
        }
    }

    /// Checks the declared bound and asymptotes against samples on the mesh.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), ModelError> {
        if !mesh.is_two_dimensional() && self.uses_y() {
            return Err(ModelError::YOnInterval {
                source_text: self.describe(),
            });
        }
        if let Some(m) = self.declared_bound {
            let mut u = -10.0;
            while u <= 10.0 {
                for idx in (0..mesh.interior_count()).step_by(7.max(mesh.interior_count() / 32))
                {
                    let (x, y) = mesh.interior_coord(idx);
                    let d = self.eval_du(x, y, u)?.abs();
                    if d > m * (1.0 + 1e-9) {
                        return Err(ModelError::BoundExceeded {
                            declared: m,
                            observed: d,
                            x,
                            u,
                        });
                    }
                }
                u += 0.25;
            }
        }
        if let Some((minus, plus)) = &self.asymptotes {
            for (probe, decl) in [(-1e6, minus), (1e6, plus)] {
                for idx in (0..mesh.interior_count()).step_by(7.max(mesh.interior_count() / 32)) {
                    let (x, y) = mesh.interior_coord(idx);
                    let declared = decl.eval(x, y)?;
                    let observed = self.eval(x, y, probe)?;
                    if (declared - observed).abs() > 1e-6 {
                        return Err(ModelError::AsymptoteMismatch {
                            declared,
                            observed,
                            probe,
                            x,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Forcing `p` on the interior nodes, split into the quadrature mean `μ₀`
/// and the exactly deflated remainder `θ`.
#[derive(Debug, Clone)]
pub struct Forcing {
    p: Vec<f64>,
    mu0: f64,
    theta: Vec<f64>,
}

impl Forcing {
    /// Splits nodal samples of `p` into mean and zero-mean parts. The text
    /// form `μ₀ = ∫ p` is read as the mean `(1/|D|) ∫ p`: only the mean is
    /// consistent with `∫ θ = 0`.
    pub fn decompose(mesh: &Mesh, p: &[f64]) -> Result<Forcing, ModelError> {
        if p.len() != mesh.interior_count() {
            return Err(MeshError::FieldLength {
                expected: mesh.interior_count(),
                got: p.len(),
            }
            .into());
        }
        if let Some(idx) = p.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteSample { index: idx });
        }
        let mut mu0 = mesh.average(p)?;
        let mut theta: Vec<f64> = p.iter().map(|v| v - mu0).collect();
        // re-deflate the rounding residue so Σ w θ vanishes to machine zero
        for _ in 0..3 {
            let residue = mesh.average(&theta)?;
            if residue == 0.0 {
                break;
            }
            theta.iter_mut().for_each(|t| *t -= residue);
            mu0 += residue;
        }
        Ok(Forcing {
            p: p.to_vec(),
            mu0,
            theta,
        })
    }

    /// Builds the forcing from a given mean and zero-mean remainder; any
    /// residual mean in `theta` is moved into `μ₀`.
    pub fn from_parts(mesh: &Mesh, mu0: f64, theta: &[f64]) -> Result<Forcing, ModelError> {
        let p: Vec<f64> = theta.iter().map(|t| mu0 + t).collect();
        Forcing::decompose(mesh, &p)
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct SolverControls {
    /// Residual max-norm tolerance τ.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            tolerance: 1e-10,
            max_iterations: 25,
        }
    }
}

/// Continuation controls for both stages.
#[derive(Debug, Clone)]
pub struct ContinuationControls {
    /// Initial homotopy step in `k`.
    pub k_step: f64,
    /// Stall threshold for the homotopy step.
    pub min_k_step: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_step: f64,
    /// Sweep anchor; defaults to the midpoint of the range.
    pub anchor: Option<f64>,
    /// ξ₁ values whose full fields are kept as snapshots during a sweep.
    pub snapshot_xis: Vec<f64>,
    /// Re-check the Jacobian against finite differences at every accepted
    /// continuation point.
    pub verify_jacobians: bool,
}

impl Default for ContinuationControls {
    fn default() -> Self {
        ContinuationControls {
            k_step: 0.1,
            min_k_step: 1e-4,
            xi_min: -5.0,
            xi_max: 5.0,
            xi_step: 0.1,
            anchor: None,
            snapshot_xis: Vec::new(),
            verify_jacobians: false,
        }
    }
}

/// Everything a solve needs: mesh, nonlinearity, forcing, and controls.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub g: Nonlinearity,
    pub forcing: Forcing,
    pub solver: SolverControls,
    pub continuation: ContinuationControls,
}

impl ProblemSpec {
    pub fn new(
        mesh: Mesh,
        g: Nonlinearity,
        forcing: Forcing,
        solver: SolverControls,
        continuation: ContinuationControls,
    ) -> Result<ProblemSpec, ModelError> {
        if solver.tolerance <= 0.0 {
            return Err(ModelError::InvalidSpec("tolerance must be positive".into()));
        }
        if solver.max_iterations == 0 {
            return Err(ModelError::InvalidSpec("max_iterations must be positive".into()));
        }
        if !(continuation.k_step > 0.0 && continuation.k_step <= 1.0) {
            return Err(ModelError::InvalidSpec(
                "k_step must lie in (0, 1]".into(),
            ));
        }
        if continuation.min_k_step <= 0.0 {
            return Err(ModelError::InvalidSpec("min_k_step must be positive".into()));
        }
        if continuation.xi_step <= 0.0 {
            return Err(ModelError::InvalidSpec("xi_step must be positive".into()));
        }
        if continuation.xi_min >= continuation.xi_max {
            return Err(ModelError::InvalidSpec(
                "xi_min must be below xi_max".into(),
            ));
        }
        if forcing.theta.len() != mesh.interior_count() {
            return Err(ModelError::InvalidSpec(
                "forcing length does not match mesh".into(),
            ));
        }
        g.validate(&mesh)?;
        Ok(ProblemSpec {
            mesh,
            g,
            forcing,
            solver,
            continuation,
        })
    }

    /// Stable content hash over the problem-defining data (mesh, g, forcing,
    /// solver controls); continuation ranges are excluded so a persisted
    /// curve can be extended.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        let (hx, hy) = self.mesh.spacing();
        h.write_f64(hx);
        h.write_f64(hy);
        h.write_usize(self.mesh.interior_count());
        h.write_str(&self.g.describe());
        h.write_f64(self.forcing.mu0);
        for t in &self.forcing.theta {
            h.write_f64(*t);
        }
        h.write_f64(self.solver.tolerance);
        h.write_usize(self.solver.max_iterations);
        h.finish()
    }
}

struct Fnv64(u64);

impl Fnv64 {
    fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
    fn write_byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x100_0000_01b3);
    }
    fn write_f64(&mut self, v: f64) {
        for b in v.to_bits().to_le_bytes() {
            self.write_byte(b);
        }
    }
    fn write_usize(&mut self, v: usize) {
        for b in (v as u64).to_le_bytes() {
            self.write_byte(b);
        }
    }
    fn write_str(&mut self, s: &str) {
        for b in s.as_bytes() {
            self.write_byte(*b);
        }
        self.write_byte(0);
    }
    fn finish(&self) -> u64 {
        self.0
    }
}

/// Largest sampled `|g_u|` over the mesh and the state box, extended by far
/// probes at `u = ±10³` and `±10⁶`. Returns the declared bound unchanged
/// when one is present. Samples that fail to evaluate are skipped.
pub fn estimate_m(g: &Nonlinearity, mesh: &Mesh, u_box: (f64, f64), samples: usize) -> f64 {
    if let Some(m) = g.declared_bound() {
        return m;
    }
    let (lo, hi) = u_box;
    let samples = samples.max(100);
    let mut best = 0.0f64;
    let mut consider = |x: f64, y: f64, u: f64, g: &Nonlinearity| {
        if let Ok(d) = g.eval_du(x, y, u) {
            if d.is_finite() {
                best = best.max(d.abs());
            }
        }
    };
    let stride = 1.max(mesh.interior_count() / 64);
    for idx in (0..mesh.interior_count()).step_by(stride) {
        let (x, y) = mesh.interior_coord(idx);
        for s in 0..samples {
            let u = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
            consider(x, y, u, g);
        }
        for u in [0.0, -1e3, 1e3, -1e6, 1e6] {
            consider(x, y, u, g);
        }
    }
    best
}
