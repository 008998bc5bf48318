/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TWOSCALE_H
#define TWOSCALE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  TS_STATUS_INVALID_ARGUMENT = 2,
  TS_STATUS_CONFIG = 3,
  TS_STATUS_SOLVER = 4,
  TS_STATUS_SINGULAR = 5,
  TS_STATUS_NOT_REAL = 6,
  TS_STATUS_DIVERGED = 7,
  TS_STATUS_NON_CONVERGENCE = 8,
  TS_STATUS_OUT_OF_RANGE = 9,
  TS_STATUS_BUFFER_TOO_SMALL = 10,
  TS_STATUS_IO = 11,
  TS_STATUS_PANIC = 12,
} TsStatus;

/**
 * Validated run configuration with its coefficient set.
 */
typedef struct TsConfig TsConfig;

/**
 * Reference seabed `z(t, x)` at one instant.
 */
typedef struct TsField TsField;

/**
 * Limit profile `Z(t, theta, x)` with its solve diagnostics.
 */
typedef struct TsProfile TsProfile;

/**
 * Discrepancy norms returned by `ts_compare_at`.
 */
typedef struct {
  double l1;
  double l2;
  double linf;
  size_t steps;
} TsNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (nul
 * terminated, truncated to `len`). Returns the full message length, or 0
 * when there is none.
 */
size_t ts_last_error(char *buf, size_t len);

/**
 * Static version string.
 */
const char *ts_version(void);

/**
 * Parses a TOML configuration; `toml` may be empty for the defaults.
 */
TsStatus ts_config_from_toml(const char *toml, TsConfig **out);

/**
 * Applies one `key=value` override and revalidates; the handle is left
 * unchanged on failure.
 */
TsStatus ts_config_set(TsConfig *config, const char *assignment);

void ts_config_free(TsConfig *config);

/**
 * Limit profile at slow time `t` with the configured order, quadrature
 * and gauge.
 */
TsStatus ts_limit_solve(const TsConfig *config, double t, TsProfile **out);

void ts_profile_free(TsProfile *profile);

TsStatus ts_profile_order(const TsProfile *profile, size_t *order);

/**
 * Residual and condition estimate of the solve.
 */
TsStatus ts_profile_diagnostics(const TsProfile *profile, double *residual, double *cond);

/**
 * Fourier coefficient of mode `(l, m, n)`.
 */
TsStatus ts_profile_coefficient(const TsProfile *profile,
                                int32_t l,
                                int32_t m,
                                int32_t n,
                                double *re,
                                double *im);

/**
 * Samples `Z(t, theta, x)` on the `n x n` grid, row-major by `x1`.
 */
TsStatus ts_profile_eval_grid(const TsProfile *profile,
                              double theta,
                              size_t n,
                              double *out,
                              size_t len);

/**
 * Integrates the oscillating problem from the configured initial seabed
 * to `t_end` at the configured epsilon.
 */
TsStatus ts_reference_solve(const TsConfig *config, double t_end, TsField **out);

void ts_field_free(TsField *field);

TsStatus ts_field_time(const TsField *field, double *t);

TsStatus ts_field_coefficient(const TsField *field, int32_t m, int32_t n, double *re, double *im);

TsStatus ts_field_eval_grid(const TsField *field, size_t n, double *out, size_t len);

/**
 * Error norms between the reference and the sliced limit profile at `t`.
 */
TsStatus ts_compare_at(const TsConfig *config, double t, TsNorms *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWOSCALE_H */
