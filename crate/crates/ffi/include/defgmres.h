#ifndef DEFGMRES_H
#define DEFGMRES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DgPrecond {
  DG_PRECOND_IDENTITY = 0,
  DG_PRECOND_JACOBI = 1,
} DgPrecond;

typedef enum DgStatus {
  DG_STATUS_OK = 0,
  DG_STATUS_NULL_POINTER = 1,
  DG_STATUS_INVALID_ARGUMENT = 2,
  DG_STATUS_DIMENSION_MISMATCH = 3,
  // The report is still produced.
  DG_STATUS_NOT_CONVERGED = 4,
  DG_STATUS_SINGULAR_COARSE_MATRIX = 5,
  DG_STATUS_SINGULAR_PROBLEM = 6,
  DG_STATUS_EIGEN_FAILURE = 7,
  DG_STATUS_FORMAT = 8,
  DG_STATUS_IO = 9,
  DG_STATUS_CONFIG = 10,
  DG_STATUS_SIZE_LIMIT = 11,
  DG_STATUS_PANIC = 12,
} DgStatus;

typedef struct DgBasis DgBasis;

typedef struct DgMatrix DgMatrix;

typedef struct DgProblem DgProblem;

typedef struct DgReport DgReport;

typedef struct DgSolverOptions {
  size_t restart;
  size_t max_iters;
  size_t min_iters;
  double tol;
  enum DgPrecond precond;
} DgSolverOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *dg_last_error_message(void);

// Defaults: restart 30, 1000 iterations, tolerance 1e-6, Jacobi.
struct DgSolverOptions dg_solver_options_default(void);

// Copies a CSR matrix of order `n` with `nnz` stored entries.
//
// # Safety
// `row_offsets` must hold `n + 1` entries, `col_indices` and `values` `nnz`
// entries each; `out` must be writable.
enum DgStatus dg_matrix_from_csr(size_t n,
                                 size_t nnz,
                                 const size_t *row_offsets,
                                 const size_t *col_indices,
                                 const double *values,
                                 struct DgMatrix **out);

// # Safety
// `m` must be a live handle or null.
size_t dg_matrix_n(const struct DgMatrix *m);

// # Safety
// `m` must be a live handle or null.
size_t dg_matrix_nnz(const struct DgMatrix *m);

// # Safety
// `m` must come from this library and not be freed twice.
void dg_matrix_free(struct DgMatrix *m);

// Builds the linear system described by an experiment config file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum DgStatus dg_problem_from_config(const char *path, struct DgProblem **out);

// # Safety
// `p` must be a live handle or null.
size_t dg_problem_n(const struct DgProblem *p);

// Matrix owned by the problem; valid while the problem lives.
//
// # Safety
// `p` must be a live handle or null.
const struct DgMatrix *dg_problem_matrix(const struct DgProblem *p);

// Copies the right-hand side into `buf`, which must hold `len == n` values.
//
// # Safety
// `p` must be a live handle; `buf` must be writable for `len` values.
enum DgStatus dg_problem_rhs(const struct DgProblem *p, double *buf, size_t len);

// # Safety
// `p` must come from this library and not be freed twice.
void dg_problem_free(struct DgProblem *p);

// Dense deflation basis from `d` columns of length `n`, stored column after
// column.
//
// # Safety
// `data` must hold `n * d` values; `out` must be writable.
enum DgStatus dg_basis_from_columns(size_t n, size_t d, const double *data, struct DgBasis **out);

// One indicator column per distinct label; labels must cover `0..=max`.
//
// # Safety
// `labels` must hold `n` values; `out` must be writable.
enum DgStatus dg_basis_from_labels(size_t n, const size_t *labels, struct DgBasis **out);

// # Safety
// `b` must be a live handle or null.
size_t dg_basis_d(const struct DgBasis *b);

// # Safety
// `b` must come from this library and not be freed twice.
void dg_basis_free(struct DgBasis *b);

// Restarted GMRES from a zero initial guess. `opts` may be null for defaults.
//
// # Safety
// `a` must be a live handle, `rhs` must hold `n` values, `out` must be
// writable.
enum DgStatus dg_gmres(const struct DgMatrix *a,
                       const double *rhs,
                       size_t n,
                       const struct DgSolverOptions *opts,
                       struct DgReport **out);

// GMRES deflated with `d` harmonic Ritz vectors refreshed from the first
// full cycle.
//
// # Safety
// As for [`dg_gmres`].
enum DgStatus dg_rdgmres(const struct DgMatrix *a,
                         const double *rhs,
                         size_t n,
                         const struct DgSolverOptions *opts,
                         size_t d,
                         struct DgReport **out);

// GMRES deflated with a fixed basis.
//
// # Safety
// As for [`dg_gmres`]; `basis` must be a live handle.
enum DgStatus dg_pdgmres(const struct DgMatrix *a,
                         const double *rhs,
                         size_t n,
                         const struct DgSolverOptions *opts,
                         const struct DgBasis *basis,
                         struct DgReport **out);

// # Safety
// `r` must be a live handle or null.
size_t dg_report_iterations(const struct DgReport *r);

// # Safety
// `r` must be a live handle or null.
bool dg_report_converged(const struct DgReport *r);

// # Safety
// `r` must be a live handle or null.
double dg_report_final_relres(const struct DgReport *r);

// # Safety
// `r` must be a live handle or null.
size_t dg_report_deflation_dim(const struct DgReport *r);

// # Safety
// `r` must be a live handle or null.
size_t dg_report_n(const struct DgReport *r);

// Copies the solution; `len` must equal [`dg_report_n`].
//
// # Safety
// `r` must be a live handle; `buf` must be writable for `len` values.
enum DgStatus dg_report_solution(const struct DgReport *r, double *buf, size_t len);

// Number of entries in the residual history, `iterations + 1`.
//
// # Safety
// `r` must be a live handle or null.
size_t dg_report_history_len(const struct DgReport *r);

// Copies the relative residual history; `len` must equal
// [`dg_report_history_len`].
//
// # Safety
// `r` must be a live handle; `buf` must be writable for `len` values.
enum DgStatus dg_report_history(const struct DgReport *r, double *buf, size_t len);

// # Safety
// `r` must come from this library and not be freed twice.
void dg_report_free(struct DgReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEFGMRES_H */
