/* C interface to the germflow laboratory. Generated by cbindgen; do not edit. */

#ifndef GERMFLOW_H
#define GERMFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum GfStatus {
  /**
   * Success.
   */
  GfStatus_Ok = 0,
  /**
   * A pointer argument was null, or text was not valid UTF-8.
   */
  GfStatus_InvalidArgument = 1,
  /**
   * The config text is not valid JSON for the scenario schema.
   */
  GfStatus_Parse = 2,
  /**
   * The config parsed but fails scenario validation.
   */
  GfStatus_Validation = 3,
  /**
   * A numeric tolerance was violated during computation.
   */
  GfStatus_Numeric = 4,
  /**
   * Filesystem failure while writing outputs.
   */
  GfStatus_Io = 5,
  /**
   * An internal invariant broke; the panic was caught at the boundary.
   */
  GfStatus_Panic = 6,
} GfStatus;

/**
 * Opaque, validated scenario handle. Created by `gf_config_parse`,
 * released by `gf_config_free`. A handle that parses is always runnable.
 */
typedef struct GfConfig GfConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never freed.
 */
const char *gf_version(void);

/**
 * Message for the most recent failure on the calling thread. The pointer
 * stays valid until the next failing call on the same thread; do not free.
 */
const char *gf_last_error(void);

/**
 * Parse and validate a scenario config from JSON text. On success writes
 * a fresh handle to `out` and returns `Ok`; on failure leaves `out`
 * untouched and reports why through the status and `gf_last_error`.
 *
 * # Safety
 * `json` must point to a NUL-terminated string and `out` to writable
 * pointer storage.
 */
enum GfStatus gf_config_parse(const char *json, struct GfConfig **out);

/**
 * Release a handle from `gf_config_parse`. Null is a no-op.
 *
 * # Safety
 * `config` must be a pointer previously returned by `gf_config_parse`
 * and not already freed.
 */
void gf_config_free(struct GfConfig *config);

/**
 * Run a scenario: writes `<study>_<name>.csv` plus `manifest.json` and
 * hands back the manifest as a JSON string (free with `gf_string_free`).
 * `out_dir` overrides the `GERMFLOW_OUT` environment variable and the
 * config's own `out_dir`; pass null to keep their precedence. `jobs` is
 * clamped to at least 1.
 *
 * # Safety
 * `config` must be a live handle; `out_dir` null or NUL-terminated;
 * `manifest_json` must point to writable pointer storage.
 */
enum GfStatus gf_run(const struct GfConfig *config,
                     uint32_t jobs,
                     const char *out_dir,
                     char **manifest_json);

/**
 * Free a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be a pointer previously returned by `gf_run` and not already
 * freed.
 */
void gf_string_free(char *s);

/**
 * Closed-form spin overlap `p = ((1 + n1.n2)/2)^two_j` between coherent
 * states at two sphere points, `theta` in `[0, pi]`, `phi` in `[0, 2pi)`.
 *
 * # Safety
 * `out` must point to writable storage for one double.
 */
enum GfStatus gf_spin_overlap(uint32_t two_j,
                              double theta1,
                              double phi1,
                              double theta2,
                              double phi2,
                              double *out);

/**
 * Closed-form Gaussian overlap `p = exp(-(|dq|^2 + |dp|^2)/(2 hbar))`
 * with `hbar = 1/l`, between packets centered at `(q1, p1)` and
 * `(q2, p2)`, each an array of `n` doubles.
 *
 * # Safety
 * The four center arrays must each hold `n` doubles; `out` must point to
 * writable storage for one double.
 */
enum GfStatus gf_gaussian_overlap(uint32_t n,
                                  uint32_t l,
                                  const double *q1,
                                  const double *p1,
                                  const double *q2,
                                  const double *p2,
                                  double *out);

/**
 * Dimension `C(l + m - 1, m - 1)` of the permutation-symmetric sector.
 *
 * # Safety
 * `out` must point to writable storage for one u64.
 */
enum GfStatus gf_symmetric_dimension(uint32_t m, uint32_t l, uint64_t *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GERMFLOW_H */
