#ifndef FBVP_H
#define FBVP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcomes. Anything other than `Ok` leaves a message readable via
 * `fbvp_last_error`.
 */
typedef enum FbvpStatus {
  FbvpStatus_Ok = 0,
  FbvpStatus_NullPointer = 1,
  FbvpStatus_InvalidUtf8 = 2,
  FbvpStatus_ConfigError = 3,
  FbvpStatus_SolverError = 4,
  FbvpStatus_Stalled = 5,
  FbvpStatus_OutOfRange = 6,
  FbvpStatus_BufferSize = 7,
  FbvpStatus_Panic = 8,
} FbvpStatus;

/**
 * Placement of the forcing mean relative to the resonance window.
 */
typedef enum FbvpVerdict {
  FbvpVerdict_Inside = 0,
  FbvpVerdict_Outside = 1,
  FbvpVerdict_Degenerate = 2,
  FbvpVerdict_Unavailable = 3,
} FbvpVerdict;

/**
 * Opaque curve handle.
 */
typedef struct FbvpCurve FbvpCurve;

/**
 * Opaque problem handle.
 */
typedef struct FbvpProblem FbvpProblem;

/**
 * Opaque set of traced solutions.
 */
typedef struct FbvpSolutions FbvpSolutions;

/**
 * Flattened hypothesis report.
 */
typedef struct FbvpReport {
  double c0;
  double lambda1;
  double lambda2;
  double m_bound;
  bool m_declared;
  /**
   * `M < min(c0, lambda2)`
   */
  bool satisfied;
  bool window_available;
  double window_lower;
  double window_upper;
  double mu0;
  enum FbvpVerdict verdict;
} FbvpReport;

/**
 * One sample of the solution curve.
 */
typedef struct FbvpCurvePoint {
  double xi1;
  double mu;
  double b;
  double sup_norm_u;
  uint32_t newton_iterations;
  double condition_estimate;
} FbvpCurvePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the underlying solver crate, as a static C string.
 */
const char *fbvp_version(void);

/**
 * Message from the most recent failing call on this thread, or null.
 * Valid until the next failing call on the same thread.
 */
const char *fbvp_last_error(void);

/**
 * Builds a problem from a TOML configuration document (same schema as the
 * CLI config file). Returns null on error.
 *
 * # Safety
 * `text` must point to a NUL-terminated string valid for the call.
 */
struct FbvpProblem *fbvp_problem_from_toml(const char *text);

/**
 * Frees a problem handle.
 *
 * # Safety
 * `p` must come from [`fbvp_problem_from_toml`] and not be freed twice.
 */
void fbvp_problem_free(struct FbvpProblem *p);

/**
 * Number of interior mesh nodes (the length of solution fields).
 *
 * # Safety
 * `p` must be a valid problem handle.
 */
uintptr_t fbvp_problem_interior_len(const struct FbvpProblem *p);

/**
 * Runs the hypothesis check and fills `out`.
 *
 * # Safety
 * `p` must be a valid problem handle and `out` a writable report struct.
 */
enum FbvpStatus fbvp_check(const struct FbvpProblem *p, struct FbvpReport *out);

/**
 * Solves at a fixed average `xi1` by the homotopy in `k`. `out_mu` and
 * `out_b` receive the multiplier and boundary value when non-null. When
 * `field_out` is non-null it must hold `field_len` doubles equal to
 * [`fbvp_problem_interior_len`]; the interior field is copied there.
 *
 * # Safety
 * Pointers must be null or valid for writes of the stated sizes.
 */
enum FbvpStatus fbvp_solve_at(const struct FbvpProblem *p,
                              double xi1,
                              double *out_mu,
                              double *out_b,
                              double *field_out,
                              uintptr_t field_len);

/**
 * Sweeps the configured `xi1` range. Returns null on error; a partial
 * (stalled) sweep still yields a curve, see [`fbvp_curve_is_partial`].
 *
 * # Safety
 * `p` must be a valid problem handle.
 */
struct FbvpCurve *fbvp_sweep(const struct FbvpProblem *p);

/**
 * Frees a curve handle.
 *
 * # Safety
 * `c` must come from [`fbvp_sweep`] and not be freed twice.
 */
void fbvp_curve_free(struct FbvpCurve *c);

/**
 * Number of samples on the curve.
 *
 * # Safety
 * `c` must be a valid curve handle.
 */
uintptr_t fbvp_curve_len(const struct FbvpCurve *c);

/**
 * True when a sweep direction stalled before its bound.
 *
 * # Safety
 * `c` must be a valid curve handle.
 */
bool fbvp_curve_is_partial(const struct FbvpCurve *c);

/**
 * Copies sample `index` into `out`.
 *
 * # Safety
 * `c` must be a valid curve handle and `out` writable.
 */
enum FbvpStatus fbvp_curve_sample(const struct FbvpCurve *c,
                                  uintptr_t index,
                                  struct FbvpCurvePoint *out);

/**
 * Finds every solution with forcing mean `mu0` on the given curve.
 *
 * # Safety
 * `p` and `c` must be valid handles from the same problem.
 */
struct FbvpSolutions *fbvp_trace(const struct FbvpProblem *p,
                                 const struct FbvpCurve *c,
                                 double mu0);

/**
 * Frees a solution-set handle.
 *
 * # Safety
 * `s` must come from [`fbvp_trace`] and not be freed twice.
 */
void fbvp_solutions_free(struct FbvpSolutions *s);

/**
 * Number of solutions found.
 *
 * # Safety
 * `s` must be a valid solution-set handle.
 */
uintptr_t fbvp_solutions_len(const struct FbvpSolutions *s);

/**
 * Scalars of solution `index`: average, multiplier, boundary value.
 *
 * # Safety
 * `s` must be valid; out pointers may be null.
 */
enum FbvpStatus fbvp_solutions_info(const struct FbvpSolutions *s,
                                    uintptr_t index,
                                    double *out_xi1,
                                    double *out_mu,
                                    double *out_b);

/**
 * Copies the interior field of solution `index` into `buf`.
 *
 * # Safety
 * `buf` must hold `buf_len` doubles.
 */
enum FbvpStatus fbvp_solutions_field(const struct FbvpSolutions *s,
                                     uintptr_t index,
                                     double *buf,
                                     uintptr_t buf_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBVP_H */
