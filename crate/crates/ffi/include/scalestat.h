#ifndef SCALESTAT_H
#define SCALESTAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_SINGULAR_DESIGN = 3,
  SS_STATUS_NON_CONVERGENCE = 4,
  SS_STATUS_NUMERICAL = 5,
  SS_STATUS_UNDEFINED_METRIC = 6,
  SS_STATUS_INFEASIBLE_SCALE = 7,
  SS_STATUS_ALL_FAILED = 8,
  SS_STATUS_PARSE = 9,
  SS_STATUS_CONFIG = 10,
  SS_STATUS_IO = 11,
  SS_STATUS_BUFFER_TOO_SMALL = 12,
  SS_STATUS_PANIC = 13,
} SsStatus;

typedef enum SsEstimator {
  SS_ESTIMATOR_MEAN,
  SS_ESTIMATOR_LINEAR_REGRESSION,
  SS_ESTIMATOR_LOGISTIC_REGRESSION,
} SsEstimator;

typedef enum SsWeighting {
  SS_WEIGHTING_POISSON,
  SS_WEIGHTING_MULTINOMIAL,
} SsWeighting;

typedef enum SsCompletionMode {
  SS_COMPLETION_MODE_PENALIZED,
  SS_COMPLETION_MODE_CONSTRAINED,
} SsCompletionMode;

typedef enum SsSignal {
  SS_SIGNAL_CUT_MATRIX,
  SS_SIGNAL_SPARSE_PCA,
} SsSignal;

typedef enum SsBody {
  SS_BODY_FULL_SPACE,
  // Convex hull of the signal family.
  SS_BODY_HULL,
  SS_BODY_ELLIPTOPE,
  SS_BODY_NUCLEAR_BALL,
} SsBody;

typedef struct SsDataset SsDataset;

typedef struct SsLowRank SsLowRank;

typedef struct SsObserved SsObserved;

typedef struct SsBlbOptions {
  // Subsample size is `ceil(n^gamma)`.
  double gamma;
  size_t s;
  size_t r;
  enum SsWeighting weighting;
  double alpha;
} SsBlbOptions;

typedef struct SsCompletionOptions {
  enum SsCompletionMode mode;
  // Used in penalized mode.
  double lambda;
  // Residual budget, used in constrained mode.
  double delta;
  size_t max_iters;
  double tol;
  // 0 leaves the rank uncapped.
  size_t rank_cap;
  uint64_t seed;
} SsCompletionOptions;

typedef struct SsBodyReport {
  double complexity;
  double complexity_se;
  uint64_t n_unit_risk;
  double risk;
  double risk_se;
  double risk_bound;
  double risk_bound_se;
  size_t unconverged;
  double projection_seconds;
} SsBodyReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length plus
// one, or 0 when there is no message. `buf` may be null to query the size.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t ss_last_error(char *buf, size_t len);

// Version string of the library; static, do not free.
const char *ss_version(void);

// Builds a dataset from `n x d` row-major features and an optional
// response of length `n` (may be null).
//
// # Safety
// `features` must point to `n * d` values, `response` to `n` values or be
// null, and `out` must be writable.
enum SsStatus ss_dataset_new(const double *features,
                             size_t n,
                             size_t d,
                             const double *response,
                             struct SsDataset **out);

// # Safety
// `ds` must be null or a handle from [`ss_dataset_new`] not yet freed.
void ss_dataset_free(struct SsDataset *ds);

// Percentile confidence-interval widths from the bootstrap with
// `resamples` resamples. `out` receives one width per coordinate.
//
// # Safety
// `ds` must be a live handle and `out` must hold `out_len` values.
enum SsStatus ss_bootstrap_ci_widths(const struct SsDataset *ds,
                                     enum SsEstimator kind,
                                     size_t resamples,
                                     double alpha,
                                     uint64_t seed,
                                     double *out,
                                     size_t out_len);

// Widths from resamples of size `m`, rescaled by `sqrt(m / n)`. Draws are
// with replacement when `with_replacement` is set, subsampling otherwise.
//
// # Safety
// As for [`ss_bootstrap_ci_widths`].
enum SsStatus ss_m_out_of_n_ci_widths(const struct SsDataset *ds,
                                      enum SsEstimator kind,
                                      size_t m,
                                      size_t resamples,
                                      bool with_replacement,
                                      double alpha,
                                      uint64_t seed,
                                      double *out,
                                      size_t out_len);

struct SsBlbOptions ss_blb_options_default(void);

// Bag of little bootstraps. `dropped`, when not null, receives the number
// of subsamples whose assessment could not be formed.
//
// # Safety
// `ds` and `opts` must be valid, `out` must hold `out_len` values and
// `dropped` must be null or writable.
enum SsStatus ss_blb_ci_widths(const struct SsDataset *ds,
                               enum SsEstimator kind,
                               const struct SsBlbOptions *opts,
                               uint64_t seed,
                               double *out,
                               size_t out_len,
                               size_t *dropped);

// Observed entries `(rows[k], cols[k]) -> values[k]`, zero-based.
//
// # Safety
// `rows`, `cols` and `values` must each point to `len` values and `out`
// must be writable.
enum SsStatus ss_observed_new(size_t nrows,
                              size_t ncols,
                              const size_t *rows,
                              const size_t *cols,
                              const double *values,
                              size_t len,
                              struct SsObserved **out);

// # Safety
// `obs` must be null or a live handle.
void ss_observed_free(struct SsObserved *obs);

// Constrained mode with `delta = 0` (interpolate the observations).
struct SsCompletionOptions ss_completion_options_default(void);

// # Safety
// `obs` and `opts` must be valid and `out` writable.
enum SsStatus ss_complete(const struct SsObserved *obs,
                          const struct SsCompletionOptions *opts,
                          struct SsLowRank **out);

// DFC-Proj with `t` column blocks completed on up to `parallelism` threads.
//
// # Safety
// As for [`ss_complete`].
enum SsStatus ss_dfc(const struct SsObserved *obs,
                     const struct SsCompletionOptions *opts,
                     size_t t,
                     bool ensemble,
                     size_t parallelism,
                     uint64_t seed,
                     struct SsLowRank **out);

// # Safety
// `est` must be null or a live handle.
void ss_lowrank_free(struct SsLowRank *est);

// Rows, columns and rank of an estimate. Any output may be null.
//
// # Safety
// `est` must be a live handle; the outputs must be null or writable.
enum SsStatus ss_lowrank_shape(const struct SsLowRank *est,
                               size_t *nrows,
                               size_t *ncols,
                               size_t *rank);

// Writes the dense estimate in row-major order.
//
// # Safety
// `est` must be a live handle and `out` must hold `out_len` values.
enum SsStatus ss_lowrank_dense(const struct SsLowRank *est, double *out, size_t out_len);

// Projection of a `q x q` matrix onto the nuclear-norm ball of `radius`.
//
// # Safety
// `x` and `out` must each hold `q * q` values.
enum SsStatus ss_project_nuclear_ball(const double *x, size_t q, double radius, double *out);

// Nearest correlation matrix to a `q x q` matrix. `converged` may be null.
//
// # Safety
// `x` and `out` must each hold `q * q` values.
enum SsStatus ss_project_elliptope(const double *x,
                                   size_t q,
                                   double tol,
                                   size_t max_iters,
                                   double *out,
                                   bool *converged);

// Nearest point of the convex hull of `count` vertices of dimension `dim`
// (stored one after another). `converged` may be null.
//
// # Safety
// `vertices` must hold `count * dim` values, `y` and `out` `dim` values.
enum SsStatus ss_project_polytope(const double *vertices,
                                  size_t count,
                                  size_t dim,
                                  const double *y,
                                  double gap_tol,
                                  size_t max_iters,
                                  double *out,
                                  bool *converged);

// Complexity of the tangent cone at a random signal, the sample size for
// unit risk, and the risk attained at that size. `k` is ignored for cut
// matrices.
//
// # Safety
// `out` must be writable.
enum SsStatus ss_body_report(enum SsSignal signal,
                             size_t p,
                             size_t k,
                             enum SsBody body,
                             double sigma,
                             size_t trials,
                             uint64_t seed,
                             struct SsBodyReport *out);

// Number of vertices of the cut polytope for `p = q^2`, or
// `SS_STATUS_INFEASIBLE_SCALE` past the enumeration cap.
//
// # Safety
// `out` must be writable.
enum SsStatus ss_cut_polytope_vertex_count(size_t p, size_t *out);

// Sample size from the noisy matrix-completion guarantee.
double ss_theorem1_sample_bound(double m, double n, double mu, double r);

// Columns per DFC block sufficient for the projection guarantee.
double ss_theorem2_column_bound(double m,
                                double n,
                                double s,
                                double mu,
                                double r,
                                double eps,
                                double c);

// `ceil(sigma^2 * complexity)`.
//
// # Safety
// `out` must be writable.
enum SsStatus ss_sample_size_for_unit_risk(double sigma, double complexity, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCALESTAT_H */
