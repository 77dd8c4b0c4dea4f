#ifndef CURVHOM_H
#define CURVHOM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CurvhomMode {
  CURVHOM_MODE_ISOMETRY = 0,
  CURVHOM_MODE_HOMOTHETY = 1,
} CurvhomMode;

typedef enum CurvhomStatus {
  CURVHOM_STATUS_OK = 0,
  CURVHOM_STATUS_NULL_POINTER = 1,
  CURVHOM_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed formula, unknown family, bad parameters or wrong point length.
   */
  CURVHOM_STATUS_INVALID_INPUT = 3,
  /**
   * Domain, degeneracy or convergence failure during evaluation.
   */
  CURVHOM_STATUS_NUMERIC = 4,
  CURVHOM_STATUS_BUFFER_TOO_SMALL = 5,
  CURVHOM_STATUS_PANIC = 6,
} CurvhomStatus;

typedef enum CurvhomVerdict {
  CURVHOM_VERDICT_EQUIVALENT = 0,
  CURVHOM_VERDICT_NOT_EQUIVALENT = 1,
  CURVHOM_VERDICT_UNKNOWN = 2,
} CurvhomVerdict;

/**
 * Opaque metric handle.
 */
typedef struct CurvhomMetric CurvhomMetric;

/**
 * Library version, a static string.
 */
const char *curvhom_version(void);

/**
 * Message of the last failed call on this thread, the reason behind an
 * `Unknown` verdict, or `NULL`. Valid until the next call on the same thread.
 */
const char *curvhom_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void curvhom_string_free(char *s);

/**
 * Catalog family such as `"walker:exp_ay"` or `"warped:sphere"`.
 *
 * # Safety
 * `name` must be a nul-terminated string; `params_json` nul-terminated or `NULL`;
 * `out` a writable handle slot.
 */
enum CurvhomStatus curvhom_metric_family(const char *name,
                                         const char *params_json,
                                         struct CurvhomMetric **out);

/**
 * Walker metric of the formula `f(x, y)`; parameters named in `params_json` may appear in `f`.
 *
 * # Safety
 * As for [`curvhom_metric_family`].
 */
enum CurvhomStatus curvhom_metric_walker(const char *f,
                                         const char *params_json,
                                         struct CurvhomMetric **out);

/**
 * # Safety
 * `h` must be `NULL` or a handle from this library that has not been freed.
 */
void curvhom_metric_free(struct CurvhomMetric *h);

/**
 * Dimension of the metric, 0 for `NULL`.
 *
 * # Safety
 * `h` must be `NULL` or a live handle.
 */
size_t curvhom_metric_dim(const struct CurvhomMetric *h);

/**
 * Components of `∇^level R` (all indices down, derivative indices last) in
 * row-major order, `dim^(4+level)` values. `*out_len` holds the capacity of
 * `out` on entry and the required length on return.
 *
 * # Safety
 * `point` must hold `point_len` values, `out` `*out_len` writable values.
 */
enum CurvhomStatus curvhom_curvature(const struct CurvhomMetric *h,
                                     const double *point,
                                     size_t point_len,
                                     size_t level,
                                     double *out,
                                     size_t *out_len);

/**
 * Scalar curvature at `point`.
 *
 * # Safety
 * `point` must hold `point_len` values and `out` be writable.
 */
enum CurvhomStatus curvhom_scalar_curvature(const struct CurvhomMetric *h,
                                            const double *point,
                                            size_t point_len,
                                            double *out);

/**
 * Compare the `k`-models of two metrics at two points. On `Equivalent`,
 * `*out_lambda` is the homothety factor (1 in isometry mode); otherwise NaN.
 * On `Unknown`, `curvhom_last_error` gives the reason.
 *
 * # Safety
 * Points must hold the stated number of values; outputs must be writable.
 */
enum CurvhomStatus curvhom_equivalent(const struct CurvhomMetric *h1,
                                      const double *point1,
                                      size_t len1,
                                      const struct CurvhomMetric *h2,
                                      const double *point2,
                                      size_t len2,
                                      size_t k,
                                      enum CurvhomMode mode,
                                      enum CurvhomVerdict *out_verdict,
                                      double *out_lambda);

/**
 * `μ(point) = |R|²(base) / |R|²(point)`.
 *
 * # Safety
 * `base` and `point` must hold `len` values each and `out` be writable.
 */
enum CurvhomStatus curvhom_mu(const struct CurvhomMetric *h,
                              const double *base,
                              const double *point,
                              size_t len,
                              double *out);

/**
 * Classification of a Walker metric over its default region, as a JSON
 * string to release with `curvhom_string_free`.
 *
 * # Safety
 * `h` must be a live handle and `out_json` writable.
 */
enum CurvhomStatus curvhom_classify_json(const struct CurvhomMetric *h, char **out_json);

#endif  /* CURVHOM_H */
