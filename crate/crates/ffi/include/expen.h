#ifndef EXPEN_H
#define EXPEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ExpenStatus {
  EXPEN_STATUS_OK = 0,
  EXPEN_STATUS_NULL_POINTER = 1,
  EXPEN_STATUS_INVALID_ARGUMENT = 2,
  EXPEN_STATUS_DIMENSION = 3,
  EXPEN_STATUS_NON_FINITE = 4,
  EXPEN_STATUS_NOT_FEASIBLE = 5,
  EXPEN_STATUS_DEGENERATE = 6,
  EXPEN_STATUS_MISSING_HESSIAN = 7,
  EXPEN_STATUS_LINE_SEARCH = 8,
  EXPEN_STATUS_NUMERICAL = 9,
  EXPEN_STATUS_PANIC = 10,
} ExpenStatus;

typedef enum ExpenTermination {
  EXPEN_TERMINATION_GRAD_TOL = 0,
  EXPEN_TERMINATION_MAX_ITERS = 1,
  EXPEN_TERMINATION_LINE_SEARCH_FAILURE = 2,
} ExpenTermination;

typedef enum ExpenSolver {
  EXPEN_SOLVER_FLETCHER_REEVES = 0,
  EXPEN_SOLVER_GRADIENT_DESCENT = 1,
} ExpenSolver;

// An objective together with a penalty parameter.
typedef struct ExpenModel ExpenModel;

// A problem instance.
typedef struct ExpenObjective ExpenObjective;

// Result of a solve.
typedef struct ExpenReport ExpenReport;

// Solver settings. A non-positive `restart_orthogonality` disables the
// orthogonality restart. `solver` holds an [`ExpenSolver`] value.
typedef struct ExpenSolverConfig {
  double delta;
  double sigma;
  double grad_tol;
  uint64_t max_iters;
  double initial_step;
  double restart_orthogonality;
  uint32_t solver;
} ExpenSolverConfig;

typedef struct ExpenReportSummary {
  double fval;
  uint64_t iterations;
  // `||grad f(P(X))||_F` at the projected point.
  double stationarity;
  double feasibility;
  double wall_seconds;
  enum ExpenTermination termination;
  double h_initial;
  double h_final;
  // `||grad h||_F` at the last unprojected iterate.
  double grad_h_norm;
  uint64_t restarts;
} ExpenReportSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next failing call on the same thread.
const char *expen_last_error(void);

// Library version as a static NUL-terminated string.
const char *expen_version(void);

// Nonlinear eigenvalue energy with the `n x n` 1-D Laplacian and coupling `alpha`.
//
// # Safety
// `out` must be valid for writes.
enum ExpenStatus expen_nleig_new(size_t n, size_t p, double alpha, struct ExpenObjective **out);

// Brockett function `(1/2) tr(X^T B X C)` from row-major symmetric `B` (`n*n`
// entries) and `C` (`p*p` entries).
//
// # Safety
// `b` and `c` must point to `b_len` and `c_len` readable doubles; `out` must
// be valid for writes.
enum ExpenStatus expen_brockett_new(size_t n,
                                    size_t p,
                                    const double *b,
                                    size_t b_len,
                                    const double *c,
                                    size_t c_len,
                                    struct ExpenObjective **out);

// Brockett instance with `B`, `C` the symmetric parts of seeded Gaussian matrices.
//
// # Safety
// `out` must be valid for writes.
enum ExpenStatus expen_brockett_random(size_t n,
                                       size_t p,
                                       uint64_t seed,
                                       struct ExpenObjective **out);

// # Safety
// `objective` must be a live handle; `n` and `p` must be valid for writes.
enum ExpenStatus expen_objective_dims(const struct ExpenObjective *objective, size_t *n, size_t *p);

// # Safety
// `objective` must be null or a handle not yet freed.
void expen_objective_free(struct ExpenObjective *objective);

// Penalty model with an explicit `beta > 0`. The objective handle may be
// freed afterwards; the model keeps its own reference.
//
// # Safety
// `objective` must be a live handle; `out` must be valid for writes.
enum ExpenStatus expen_model_new(const struct ExpenObjective *objective,
                                 double beta,
                                 struct ExpenModel **out);

// Penalty model with `beta = ||grad f(X0)||_F / 10`.
//
// # Safety
// `objective` must be a live handle, `x0` must point to `x0_len` doubles and
// `out` must be valid for writes.
enum ExpenStatus expen_model_new_default_beta(const struct ExpenObjective *objective,
                                              const double *x0,
                                              size_t x0_len,
                                              struct ExpenModel **out);

// # Safety
// `model` must be a live handle; `beta` must be valid for writes.
enum ExpenStatus expen_model_beta(const struct ExpenModel *model, double *beta);

// Penalty value `h(X)`.
//
// # Safety
// `model` must be a live handle, `x` must point to `len` doubles and `value`
// must be valid for writes.
enum ExpenStatus expen_model_value(const struct ExpenModel *model,
                                   const double *x,
                                   size_t len,
                                   double *value);

// Penalty gradient, written row-major into `out` (`len` entries).
//
// # Safety
// `x` and `out` must each point to `len` doubles.
enum ExpenStatus expen_model_gradient(const struct ExpenModel *model,
                                      const double *x,
                                      size_t len,
                                      double *out);

// Penalty Hessian applied to `d`, written row-major into `out`.
//
// # Safety
// `x`, `d` and `out` must each point to `len` doubles.
enum ExpenStatus expen_model_hess_vec(const struct ExpenModel *model,
                                      const double *x,
                                      const double *d,
                                      size_t len,
                                      double *out);

// # Safety
// `model` must be null or a handle not yet freed.
void expen_model_free(struct ExpenModel *model);

// Seeded random point with orthonormal columns, written row-major.
//
// # Safety
// `out` must point to `len` writable doubles.
enum ExpenStatus expen_random_stiefel(size_t n, size_t p, uint64_t seed, double *out, size_t len);

// Nearest matrix with orthonormal columns.
//
// # Safety
// `x` and `out` must each point to `n * p` doubles.
enum ExpenStatus expen_project_stiefel(size_t n, size_t p, const double *x, double *out);

// `||X^T X - I||_F`.
//
// # Safety
// `x` must point to `n * p` doubles and `value` must be valid for writes.
enum ExpenStatus expen_feasibility(size_t n, size_t p, const double *x, double *value);

// Defaults matching the benchmark protocol.
struct ExpenSolverConfig expen_solver_config_default(void);

// Minimises the penalty from `x0`. A line-search failure is reported through
// the report's termination field, not as an error status.
//
// # Safety
// `model` must be a live handle, `x0` must point to `len` doubles, `config`
// must be null (defaults) or valid, and `out` must be valid for writes.
enum ExpenStatus expen_solve(const struct ExpenModel *model,
                             const double *x0,
                             size_t len,
                             const struct ExpenSolverConfig *config,
                             struct ExpenReport **out);

// # Safety
// `report` must be a live handle; `summary` must be valid for writes.
enum ExpenStatus expen_report_summary(const struct ExpenReport *report,
                                      struct ExpenReportSummary *summary);

// Projected final point, row-major.
//
// # Safety
// `out` must point to `len` writable doubles.
enum ExpenStatus expen_report_final_point(const struct ExpenReport *report,
                                          double *out,
                                          size_t len);

// # Safety
// `report` must be null or a handle not yet freed.
void expen_report_free(struct ExpenReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXPEN_H */
