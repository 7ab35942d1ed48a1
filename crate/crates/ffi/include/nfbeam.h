#ifndef NFBEAM_H
#define NFBEAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NfbStatus {
  NFB_STATUS_OK = 0,
  NFB_STATUS_NULL_POINTER = 1,
  NFB_STATUS_INVALID_ARGUMENT = 2,
  NFB_STATUS_CONFIG = 3,
  NFB_STATUS_IO = 4,
  NFB_STATUS_NUMERICAL = 5,
  NFB_STATUS_PANIC = 6,
} NfbStatus;

typedef struct NfbConfig NfbConfig;

typedef struct NfbScenario NfbScenario;

typedef struct NfbTrialResult NfbTrialResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating if needed. Returns the full message
// length in bytes, not counting the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t nfb_last_error(char *buf, size_t len);

// Static NUL-terminated version string.
const char *nfb_version(void);

// New configuration holding the desk defaults. Never null.
struct NfbConfig *nfb_config_new(void);

// Loads a `key = value` configuration file.
//
// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum NfbStatus nfb_config_load(const char *path, struct NfbConfig **out);

// Sets one configuration key. Accepts the file keys plus `solver`
// (`wmmse-ts`, `pli`, `fixed`) and `channel` (`near`, `far`).
//
// # Safety
// `cfg` must come from this library; `key` and `value` must be valid C
// strings.
enum NfbStatus nfb_config_set(struct NfbConfig *cfg, const char *key, const char *value);

// # Safety
// `cfg` must be null or come from this library and not be used afterwards.
void nfb_config_free(struct NfbConfig *cfg);

// Draws a random scenario from the configuration and `seed`.
//
// # Safety
// `cfg` must come from this library and `out` must be valid.
enum NfbStatus nfb_scenario_sample(const struct NfbConfig *cfg,
                                   uint64_t seed,
                                   struct NfbScenario **out);

// Number of users, or 0 for a null handle.
//
// # Safety
// `scenario` must be null or come from this library.
size_t nfb_scenario_num_users(const struct NfbScenario *scenario);

// # Safety
// `scenario` must be null or come from this library and not be used
// afterwards.
void nfb_scenario_free(struct NfbScenario *scenario);

// Runs the configured solver on a scenario.
//
// # Safety
// Handles must come from this library and `out` must be valid.
enum NfbStatus nfb_trial_run(const struct NfbScenario *scenario,
                             const struct NfbConfig *cfg,
                             struct NfbTrialResult **out);

// Sum rate in bit/s/Hz; 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
double nfb_trial_sum_rate(const struct NfbTrialResult *result);

// Network objective; 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
double nfb_trial_objective(const struct NfbTrialResult *result);

// Hardware power in watts; 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
double nfb_trial_hpc(const struct NfbTrialResult *result);

// Transmit power in watts; 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
double nfb_trial_tx_power(const struct NfbTrialResult *result);

// Number of active streams, equal to the active RF chains; 0 for a null handle.
//
// # Safety
// `result` must be null or come from this library.
size_t nfb_trial_streams(const struct NfbTrialResult *result);

// Copies up to `len` per-user rates into `buf` and returns the number of
// users.
//
// # Safety
// `result` must be null or come from this library; `buf` must be null or
// hold `len` doubles.
size_t nfb_trial_rates(const struct NfbTrialResult *result, double *buf, size_t len);

// # Safety
// `result` must be null or come from this library and not be used
// afterwards.
void nfb_trial_free(struct NfbTrialResult *result);

// Splits `amplitude * e^{j phase}`, amplitude in `[0, 2]`, into two unit
// phasors. `out` receives `re1, im1, re2, im2`.
//
// # Safety
// `out` must point to 4 writable doubles.
enum NfbStatus nfb_phase_split(double amplitude, double phase, double *out);

// Hardware power of `streams` active RF chains on an `mt`-antenna array.
//
// # Safety
// `out` must point to a writable double.
enum NfbStatus nfb_hardware_power(size_t mt,
                                  size_t streams,
                                  double rf_chain_watts,
                                  double shifter_watts,
                                  double *out);

// Runs a sweep over `axis` (`p_max_dbm`, `beta`, `mu`, `bits`, `distance`)
// and writes the per-trial CSV to `path` plus the summary next to it.
// Completed trials are written even when a trial fails.
//
// # Safety
// `cfg` must come from this library, `axis` and `path` must be valid C
// strings and `values` must hold `count` doubles.
enum NfbStatus nfb_sweep_to_csv(const struct NfbConfig *cfg,
                                const char *axis,
                                const double *values,
                                size_t count,
                                const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFBEAM_H */
