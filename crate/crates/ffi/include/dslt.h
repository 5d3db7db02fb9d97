#ifndef DSLT_H
#define DSLT_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from the dslt-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum DsltStatus {
  DSLT_STATUS_OK = 0,
  DSLT_STATUS_DOMAIN = 1,
  DSLT_STATUS_FACTORIZATION = 2,
  DSLT_STATUS_EMBEDDING = 3,
  DSLT_STATUS_CONTRACT = 4,
  DSLT_STATUS_NUMERICAL = 5,
  DSLT_STATUS_SINGULAR = 6,
  DSLT_STATUS_IO = 7,
  DSLT_STATUS_PARSE = 8,
  DSLT_STATUS_NULL_POINTER = 9,
  DSLT_STATUS_BUFFER_TOO_SMALL = 10,
  DSLT_STATUS_PANIC = 11,
} DsltStatus;

/**
 * Path sampling method.
 */
typedef enum DsltMethod {
  DSLT_METHOD_CHOLESKY = 0,
  DSLT_METHOD_CIRCULANT = 1,
} DsltMethod;

/**
 * Opaque reusable path sampler.
 */
typedef struct DsltSampler DsltSampler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dslt_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dslt_version(void);

/**
 * `Cov(B_s, B_t)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsltStatus dslt_fbm_cov(double hurst, double s, double t, double *out);

/**
 * Create a sampler on `steps` uniform steps of `[0, t_max]`.
 *
 * # Safety
 * `out` must be valid for writes; release the handle with [`dslt_sampler_free`].
 */
enum DsltStatus dslt_sampler_new(double hurst,
                                 double t_max,
                                 size_t steps,
                                 enum DsltMethod method,
                                 struct DsltSampler **out);

/**
 * Sample path `stream` of `seed` into `values`, which must hold `steps + 1` doubles.
 *
 * # Safety
 * `sampler` must come from [`dslt_sampler_new`]; `values` valid for `len` writes.
 */
enum DsltStatus dslt_sampler_sample(const struct DsltSampler *sampler,
                                    uint64_t seed,
                                    uint64_t stream,
                                    double *values,
                                    size_t len);

/**
 * Release a sampler; null is ignored.
 *
 * # Safety
 * `sampler` must be null or come from [`dslt_sampler_new`] and not be used afterwards.
 */
void dslt_sampler_free(struct DsltSampler *sampler);

/**
 * `E[alpha'_{t,eps}(y)]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsltStatus dslt_mean_alpha_eps(double hurst, double t, double eps, double y, double *out);

/**
 * Mollified estimator on a path given by `len` values on a uniform grid of `[0, t_max]`.
 *
 * # Safety
 * `values` must be valid for `len` reads; `out` valid for writes.
 */
enum DsltStatus dslt_alpha_prime_estimate(double hurst,
                                          double t_max,
                                          const double *values,
                                          size_t len,
                                          double t,
                                          double eps,
                                          double y,
                                          double *out);

/**
 * Quadrature value of `E[alpha'_{t,eps}(0)^2]`; `eps = 0` gives the limit.
 *
 * # Safety
 * Out pointers must be valid for writes.
 */
enum DsltStatus dslt_second_moment(double hurst,
                                   double t,
                                   double eps,
                                   double *out_value,
                                   double *out_err);

/**
 * Limit second moment by refinement; `out_converged` is 1 on Cauchy convergence.
 *
 * # Safety
 * Out pointers must be valid for writes.
 */
enum DsltStatus dslt_chaos_norm_integral(double hurst,
                                         double t,
                                         double tol,
                                         double *out_value,
                                         double *out_err,
                                         int32_t *out_converged);

/**
 * Sum of the chaos norms up to `m_max` plus the extrapolated tail.
 *
 * # Safety
 * Out pointers must be valid for writes.
 */
enum DsltStatus dslt_chaos_total_norm(double hurst,
                                      double t,
                                      size_t m_max,
                                      double tol,
                                      double *out_total,
                                      double *out_err);

/**
 * Closed form of the odd generating series.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsltStatus dslt_odd_series(double gamma, double *out);

/**
 * Closed form of the even generating series.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsltStatus dslt_even_series(double gamma, double *out);

/**
 * Determinant over the case bound for gaps `(a, b, c)`; `case_id` is 1, 2 or 3.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DsltStatus dslt_bound_ratio(double hurst,
                                 int32_t case_id,
                                 double a,
                                 double b,
                                 double c,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DSLT_H */
