#ifndef ECAS_H
#define ECAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EcasStatus {
  ECAS_STATUS_OK = 0,
  ECAS_STATUS_NULL_POINTER = 1,
  ECAS_STATUS_INVALID_ARGUMENT = 2,
  ECAS_STATUS_CALIBRATION_FAILED = 3,
  ECAS_STATUS_UNKNOWN_SENSOR = 4,
  ECAS_STATUS_UNKNOWN_ZONE = 5,
  ECAS_STATUS_PARSE = 6,
  ECAS_STATUS_CONFIG = 7,
  ECAS_STATUS_IO = 8,
  ECAS_STATUS_INVALID_UTF8 = 9,
  ECAS_STATUS_PANIC = 10,
} EcasStatus;

typedef enum EcasPolicy {
  ECAS_POLICY_FIXED = 0,
  ECAS_POLICY_CONSERVATIVE = 1,
  ECAS_POLICY_AGGRESSIVE = 2,
} EcasPolicy;

/**
 * Channel parameters.
 */
typedef struct EcasParams EcasParams;

/**
 * Result of a policy sweep.
 */
typedef struct EcasSweep EcasSweep;

typedef struct EcasTotals {
  uint64_t sent;
  uint64_t received;
  uint64_t lost;
  /**
   * Delivered / sent; 0 when nothing was sent.
   */
  double pdr;
} EcasTotals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ecas_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ecas_version(void);

/**
 * Calibrates channel parameters against the built-in link milestones.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum EcasStatus ecas_params_calibrate(struct EcasParams **out);

/**
 * Loads a channel parameter file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum EcasStatus ecas_params_load(const char *path, struct EcasParams **out);

/**
 * # Safety
 * `params` must come from this library; `path` must be NUL-terminated.
 */
enum EcasStatus ecas_params_save(const struct EcasParams *params, const char *path);

/**
 * # Safety
 * `params` must come from this library and not be used afterwards. Null
 * is ignored.
 */
void ecas_params_free(struct EcasParams *params);

/**
 * Link margin in dB for a DR, distance and rain rate with default radio
 * settings. Non-negative means the packet is received.
 *
 * # Safety
 * `params` must come from this library; `out_margin_db` must be writable.
 */
enum EcasStatus ecas_link_margin(const struct EcasParams *params,
                                 uint8_t dr,
                                 double distance_m,
                                 double rain_mm_h,
                                 double *out_margin_db);

/**
 * Airtime in seconds of a `payload_bytes` packet at `dr`.
 *
 * # Safety
 * `out_seconds` must be writable.
 */
enum EcasStatus ecas_time_on_air(uint8_t dr, uint16_t payload_bytes, double *out_seconds);

/**
 * Runs one round of the default three-sensor deployment with a fresh
 * policy. `fixed_dr` is only read for [`EcasPolicy::Fixed`].
 *
 * # Safety
 * `params` must come from this library; `out` must be writable.
 */
enum EcasStatus ecas_round_run(const struct EcasParams *params,
                               enum EcasPolicy policy,
                               uint8_t fixed_dr,
                               double rain_mm_h,
                               double duration_s,
                               struct EcasTotals *out);

/**
 * Runs a sweep. `spec_path` may be null for the default experiment; the
 * spec's own channel source is ignored in favour of `params`.
 *
 * # Safety
 * `params` must come from this library; `spec_path` must be null or
 * NUL-terminated; `out` must be writable.
 */
enum EcasStatus ecas_sweep_run(const struct EcasParams *params,
                               const char *spec_path,
                               struct EcasSweep **out);

/**
 * Number of policies in the sweep; 0 for a null handle.
 *
 * # Safety
 * `sweep` must be null or come from this library.
 */
size_t ecas_sweep_policy_count(const struct EcasSweep *sweep);

/**
 * Aggregate totals of the `index`-th policy.
 *
 * # Safety
 * `sweep` must come from this library; the out pointers must be writable.
 */
enum EcasStatus ecas_sweep_policy_totals(const struct EcasSweep *sweep,
                                         size_t index,
                                         enum EcasPolicy *out_policy,
                                         uint8_t *out_fixed_dr,
                                         struct EcasTotals *out_totals);

/**
 * Writes the CSV/SVG report set into `dir`.
 *
 * # Safety
 * `sweep` must come from this library; `dir` must be NUL-terminated.
 */
enum EcasStatus ecas_sweep_write_reports(const struct EcasSweep *sweep, const char *dir);

/**
 * # Safety
 * `sweep` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void ecas_sweep_free(struct EcasSweep *sweep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECAS_H */
