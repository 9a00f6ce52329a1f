//! C ABI for the continuation solver: opaque handles, plain structs, and
//! status codes, so other languages can drive the solver without the CLI.
//!
//! Conventions: constructors return null on failure and record a message
//! retrievable with [`fbvp_last_error`]; every handle has exactly one
//! matching `_free` function; all other calls return an [`FbvpStatus`].

use fbvp::analysis::{check_hypotheses, LlWindow, MuVerdict};
use fbvp::cli::{build_problem, RunConfig};
use fbvp::continuation::{continue_in_k, sweep_xi, trace_mu_crossings, ContinuationCurve};
use fbvp::model::ProblemSpec;
use fbvp::solver::AugmentedState;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").expect("literal"));
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Call outcomes. Anything other than `Ok` leaves a message readable via
/// `fbvp_last_error`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum FbvpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    SolverError = 4,
    Stalled = 5,
    OutOfRange = 6,
    BufferSize = 7,
    Panic = 8,
}

/// Placement of the forcing mean relative to the resonance window.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum FbvpVerdict {
    Inside = 0,
    Outside = 1,
    Degenerate = 2,
    Unavailable = 3,
}

/// Flattened hypothesis report.
#[repr(C)]
pub struct FbvpReport {
    pub c0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub m_bound: f64,
    pub m_declared: bool,
    /// `M < min(c0, lambda2)`
    pub satisfied: bool,
    pub window_available: bool,
    pub window_lower: f64,
    pub window_upper: f64,
    pub mu0: f64,
    pub verdict: FbvpVerdict,
}

/// One sample of the solution curve.
#[repr(C)]
pub struct FbvpCurvePoint {
    pub xi1: f64,
    pub mu: f64,
    pub b: f64,
    pub sup_norm_u: f64,
    pub newton_iterations: u32,
    pub condition_estimate: f64,
}

/// Opaque problem handle.
pub struct FbvpProblem {
    spec: ProblemSpec,
}

/// Opaque curve handle.
pub struct FbvpCurve {
    curve: ContinuationCurve,
}

/// Opaque set of traced solutions.
pub struct FbvpSolutions {
    states: Vec<AugmentedState>,
}

/// Version of the underlying solver crate, as a static C string.
#[no_mangle]
pub extern "C" fn fbvp_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message from the most recent failing call on this thread, or null.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fbvp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(c) => c.as_ptr(),
        None => ptr::null(),
    })
}

/// Builds a problem from a TOML configuration document (same schema as the
/// CLI config file). Returns null on error.
///
/// # Safety
/// `text` must point to a NUL-terminated string valid for the call.
#[no_mangle]
pub unsafe extern "C" fn fbvp_problem_from_toml(text: *const c_char) -> *mut FbvpProblem {
    if text.is_null() {
        set_error("null configuration text".into());
        return ptr::null_mut();
    }
    let s = match CStr::from_ptr(text).to_str() {
        Ok(s) => s.to_owned(),
        Err(_) => {
            set_error("configuration text is not valid UTF-8".into());
            return ptr::null_mut();
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| -> Result<FbvpProblem, String> {
        let cfg: RunConfig = toml_parse(&s)?;
        let spec = build_problem(&cfg).map_err(|e| e.to_string())?;
        Ok(FbvpProblem { spec })
    }));
    match result {
        Ok(Ok(p)) => Box::into_raw(Box::new(p)),
        Ok(Err(msg)) => {
            set_error(msg);
            ptr::null_mut()
        }
        Err(_) => {
            set_error("panic while building the problem".into());
            ptr::null_mut()
        }
    }
}

fn toml_parse(s: &str) -> Result<RunConfig, String> {
    // reuse the CLI loader semantics without touching the filesystem
    fbvp::cli::load_config_str(s).map_err(|e| e.to_string())
}

/// Frees a problem handle.
///
/// # Safety
/// `p` must come from [`fbvp_problem_from_toml`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fbvp_problem_free(p: *mut FbvpProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of interior mesh nodes (the length of solution fields).
///
/// # Safety
/// `p` must be a valid problem handle.
#[no_mangle]
pub unsafe extern "C" fn fbvp_problem_interior_len(p: *const FbvpProblem) -> usize {
    if p.is_null() {
        return 0;
    }
    let spec = &(*p).spec;
    spec.mesh.interior_count()
}

/// Runs the hypothesis check and fills `out`.
///
/// # Safety
/// `p` must be a valid problem handle and `out` a writable report struct.
#[no_mangle]
pub unsafe extern "C" fn fbvp_check(p: *const FbvpProblem, out: *mut FbvpReport) -> FbvpStatus {
    if p.is_null() || out.is_null() {
        set_error("null argument".into());
        return FbvpStatus::NullPointer;
    }
    let spec = &(*p).spec;
    let result = catch_unwind(AssertUnwindSafe(|| check_hypotheses(spec)));
    match result {
        Ok(Ok(r)) => {
            let (window_available, lo, hi) = match &r.window {
                LlWindow::Available { lower, upper } => (true, *lower, *upper),
                LlWindow::Unavailable { .. } => (false, f64::NAN, f64::NAN),
            };
            *out = FbvpReport {
                c0: r.c0,
                lambda1: r.lambda1,
                lambda2: r.lambda2,
                m_bound: r.m_bound,
                m_declared: r.m_declared,
                satisfied: r.satisfied,
                window_available,
                window_lower: lo,
                window_upper: hi,
                mu0: r.mu0,
                verdict: match r.verdict {
                    MuVerdict::Inside => FbvpVerdict::Inside,
                    MuVerdict::Outside => FbvpVerdict::Outside,
                    MuVerdict::Degenerate => FbvpVerdict::Degenerate,
                    MuVerdict::Unavailable => FbvpVerdict::Unavailable,
                },
            };
            FbvpStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            FbvpStatus::SolverError
        }
        Err(_) => {
            set_error("panic during hypothesis check".into());
            FbvpStatus::Panic
        }
    }
}

/// Solves at a fixed average `xi1` by the homotopy in `k`. `out_mu` and
/// `out_b` receive the multiplier and boundary value when non-null. When
/// `field_out` is non-null it must hold `field_len` doubles equal to
/// [`fbvp_problem_interior_len`]; the interior field is copied there.
///
/// # Safety
/// Pointers must be null or valid for writes of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn fbvp_solve_at(
    p: *const FbvpProblem,
    xi1: f64,
    out_mu: *mut f64,
    out_b: *mut f64,
    field_out: *mut f64,
    field_len: usize,
) -> FbvpStatus {
    if p.is_null() {
        set_error("null problem".into());
        return FbvpStatus::NullPointer;
    }
    let spec = &(*p).spec;
    if !field_out.is_null() && field_len != spec.mesh.interior_count() {
        set_error(format!(
            "field buffer holds {field_len} entries, need {}",
            spec.mesh.interior_count()
        ));
        return FbvpStatus::BufferSize;
    }
    let result = catch_unwind(AssertUnwindSafe(|| continue_in_k(spec, xi1)));
    match result {
        Ok(Ok((state, _trace))) => {
            if !out_mu.is_null() {
                *out_mu = state.mu;
            }
            if !out_b.is_null() {
                *out_b = state.b();
            }
            if !field_out.is_null() {
                let u = state.u_values();
                ptr::copy_nonoverlapping(u.as_ptr(), field_out, u.len());
            }
            FbvpStatus::Ok
        }
        Ok(Err(e)) => {
            let status = match &e {
                fbvp::continuation::ContinuationError::Stalled { .. } => FbvpStatus::Stalled,
                _ => FbvpStatus::SolverError,
            };
            set_error(e.to_string());
            status
        }
        Err(_) => {
            set_error("panic during solve".into());
            FbvpStatus::Panic
        }
    }
}

/// Sweeps the configured `xi1` range. Returns null on error; a partial
/// (stalled) sweep still yields a curve, see [`fbvp_curve_is_partial`].
///
/// # Safety
/// `p` must be a valid problem handle.
#[no_mangle]
pub unsafe extern "C" fn fbvp_sweep(p: *const FbvpProblem) -> *mut FbvpCurve {
    if p.is_null() {
        set_error("null problem".into());
        return ptr::null_mut();
    }
    let spec = &(*p).spec;
    match catch_unwind(AssertUnwindSafe(|| sweep_xi(spec))) {
        Ok(Ok(curve)) => Box::into_raw(Box::new(FbvpCurve { curve })),
        Ok(Err(e)) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
        Err(_) => {
            set_error("panic during sweep".into());
            ptr::null_mut()
        }
    }
}

/// Frees a curve handle.
///
/// # Safety
/// `c` must come from [`fbvp_sweep`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fbvp_curve_free(c: *mut FbvpCurve) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of samples on the curve.
///
/// # Safety
/// `c` must be a valid curve handle.
#[no_mangle]
pub unsafe extern "C" fn fbvp_curve_len(c: *const FbvpCurve) -> usize {
    if c.is_null() {
        return 0;
    }
    let curve = &(*c).curve;
    curve.samples.len()
}

/// True when a sweep direction stalled before its bound.
///
/// # Safety
/// `c` must be a valid curve handle.
#[no_mangle]
pub unsafe extern "C" fn fbvp_curve_is_partial(c: *const FbvpCurve) -> bool {
    if c.is_null() {
        return false;
    }
    let curve = &(*c).curve;
    curve.is_partial()
}

/// Copies sample `index` into `out`.
///
/// # Safety
/// `c` must be a valid curve handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fbvp_curve_sample(
    c: *const FbvpCurve,
    index: usize,
    out: *mut FbvpCurvePoint,
) -> FbvpStatus {
    if c.is_null() || out.is_null() {
        set_error("null argument".into());
        return FbvpStatus::NullPointer;
    }
    let samples = &(*c).curve.samples;
    match samples.get(index) {
        Some(s) => {
            *out = FbvpCurvePoint {
                xi1: s.xi1,
                mu: s.mu,
                b: s.b,
                sup_norm_u: s.sup_norm_u,
                newton_iterations: s.newton_iterations as u32,
                condition_estimate: s.condition_estimate,
            };
            FbvpStatus::Ok
        }
        None => {
            set_error(format!("sample {index} out of range ({})", samples.len()));
            FbvpStatus::OutOfRange
        }
    }
}

/// Finds every solution with forcing mean `mu0` on the given curve.
///
/// # Safety
/// `p` and `c` must be valid handles from the same problem.
#[no_mangle]
pub unsafe extern "C" fn fbvp_trace(
    p: *const FbvpProblem,
    c: *const FbvpCurve,
    mu0: f64,
) -> *mut FbvpSolutions {
    if p.is_null() || c.is_null() {
        set_error("null argument".into());
        return ptr::null_mut();
    }
    let spec = &(*p).spec;
    let curve = &(*c).curve;
    match catch_unwind(AssertUnwindSafe(|| trace_mu_crossings(curve, spec, mu0))) {
        Ok(outcome) => {
            let mut states: Vec<AugmentedState> =
                outcome.crossings.into_iter().map(|cr| cr.state).collect();
            states.sort_by(|a, b| a.xi1.partial_cmp(&b.xi1).expect("finite"));
            Box::into_raw(Box::new(FbvpSolutions { states }))
        }
        Err(_) => {
            set_error("panic during trace".into());
            ptr::null_mut()
        }
    }
}

/// Frees a solution-set handle.
///
/// # Safety
/// `s` must come from [`fbvp_trace`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fbvp_solutions_free(s: *mut FbvpSolutions) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of solutions found.
///
/// # Safety
/// `s` must be a valid solution-set handle.
#[no_mangle]
pub unsafe extern "C" fn fbvp_solutions_len(s: *const FbvpSolutions) -> usize {
    if s.is_null() {
        return 0;
    }
    let states = &(*s).states;
    states.len()
}

/// Scalars of solution `index`: average, multiplier, boundary value.
///
/// # Safety
/// `s` must be valid; out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn fbvp_solutions_info(
    s: *const FbvpSolutions,
    index: usize,
    out_xi1: *mut f64,
    out_mu: *mut f64,
    out_b: *mut f64,
) -> FbvpStatus {
    if s.is_null() {
        set_error("null solutions".into());
        return FbvpStatus::NullPointer;
    }
    let states = &(*s).states;
    match states.get(index) {
        Some(state) => {
            if !out_xi1.is_null() {
                *out_xi1 = state.xi1;
            }
            if !out_mu.is_null() {
                *out_mu = state.mu;
            }
            if !out_b.is_null() {
                *out_b = state.b();
            }
            FbvpStatus::Ok
        }
        None => {
            set_error(format!("solution {index} out of range"));
            FbvpStatus::OutOfRange
        }
    }
}

/// Copies the interior field of solution `index` into `buf`.
///
/// # Safety
/// `buf` must hold `buf_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn fbvp_solutions_field(
    s: *const FbvpSolutions,
    index: usize,
    buf: *mut f64,
    buf_len: usize,
) -> FbvpStatus {
    if s.is_null() || buf.is_null() {
        set_error("null argument".into());
        return FbvpStatus::NullPointer;
    }
    let states = &(*s).states;
    match states.get(index) {
        Some(state) => {
            if buf_len != state.deviation.len() {
                set_error(format!(
                    "buffer holds {buf_len} entries, need {}",
                    state.deviation.len()
                ));
                return FbvpStatus::BufferSize;
            }
            let u = state.u_values();
            ptr::copy_nonoverlapping(u.as_ptr(), buf, u.len());
            FbvpStatus::Ok
        }
        None => {
            set_error(format!("solution {index} out of range"));
            FbvpStatus::OutOfRange
        }
    }
}
