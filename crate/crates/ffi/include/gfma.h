#ifndef GFMA_H
#define GFMA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GfmaStatus {
  GFMA_STATUS_OK = 0,
  // A required pointer argument was null.
  GFMA_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  GFMA_STATUS_INVALID_UTF8 = 2,
  // Bad configuration key, value or file contents.
  GFMA_STATUS_CONFIG = 3,
  // A numerical stage failed (singular system, divergence, ...).
  GFMA_STATUS_NUMERIC = 4,
  GFMA_STATUS_IO = 5,
  // Any other rejected argument.
  GFMA_STATUS_INVALID_ARGUMENT = 6,
  // An internal panic was caught.
  GFMA_STATUS_PANIC = 7,
} GfmaStatus;

// Opaque configuration handle.
typedef struct GfmaConfig GfmaConfig;

// Scores of one simulated frame.
typedef struct GfmaTrialMetrics {
  uint64_t trial;
  uint64_t seed;
  double adep;
  double ber;
  // Linear CSI NMSE; NaN when the scheme estimates no CSI.
  double nmse;
  // BER after the coarse stage; NaN for baselines.
  double coarse_ber;
  uint64_t ka_hat;
} GfmaTrialMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a configuration with the laptop-scale profile.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum GfmaStatus gfma_config_new_desk(struct GfmaConfig **out);

// Creates a configuration with the full-scale profile.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum GfmaStatus gfma_config_new_full(struct GfmaConfig **out);

// Reads a `key = value` configuration file.
//
// # Safety
// `path` must be a NUL-terminated string, `out` valid writable storage.
enum GfmaStatus gfma_config_load(const char *path, struct GfmaConfig **out);

// Sets one key. The configuration is left unchanged when the new value
// is rejected.
//
// # Safety
// `config` must come from a `gfma_config_new_*`/`gfma_config_load` call
// and not be in use on another thread; `key` and `value` NUL-terminated.
enum GfmaStatus gfma_config_set(struct GfmaConfig *config, const char *key, const char *value);

// Writes the configuration in file syntax to `*out`.
//
// # Safety
// `config` must be a live handle; `out` valid writable storage. Release
// the string with `gfma_string_free`.
enum GfmaStatus gfma_config_to_string(const struct GfmaConfig *config, char **out);

// Releases a configuration handle. Null is ignored.
//
// # Safety
// `config` must be null or a live handle, not used afterwards.
void gfma_config_free(struct GfmaConfig *config);

// Simulates frame `trial` with `scheme` (`proposed`, `baseline1`..`baseline4`).
//
// # Safety
// `config` must be a live handle, `scheme` NUL-terminated, `out` valid.
enum GfmaStatus gfma_run_trial(const struct GfmaConfig *config,
                               const char *scheme,
                               uint64_t trial,
                               struct GfmaTrialMetrics *out);

// Runs `trials` frames of each comma-separated scheme and writes the CSV
// table to `*out`.
//
// # Safety
// As for `gfma_run_trial`; release `*out` with `gfma_string_free`.
enum GfmaStatus gfma_run_csv(const struct GfmaConfig *config,
                             const char *schemes,
                             uint64_t trials,
                             char **out);

// Sweeps `var` (`T`, `M`, `rho`, `N_iter` or `scheme`) over the
// comma-separated `values` and writes the CSV table to `*out`.
//
// # Safety
// As for `gfma_run_csv`; all strings NUL-terminated.
enum GfmaStatus gfma_sweep_csv(const struct GfmaConfig *config,
                               const char *var,
                               const char *values,
                               const char *schemes,
                               uint64_t trials,
                               char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library, not used afterwards.
void gfma_string_free(char *s);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next library call on the same thread.
const char *gfma_last_error(void);

// Library version, static storage.
const char *gfma_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GFMA_H */
