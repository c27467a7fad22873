#ifndef RELCHAIN_H
#define RELCHAIN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_ARGUMENT = 1,
  RC_STATUS_INVALID_UTF8 = 2,
  RC_STATUS_INVALID_CONFIG = 3,
  RC_STATUS_SIMULATION_FAILED = 4,
  RC_STATUS_MALFORMED = 5,
  RC_STATUS_OUT_OF_SEQUENCE = 6,
  RC_STATUS_HASH_MISMATCH = 7,
  RC_STATUS_BAD_SIGNATURE = 8,
  RC_STATUS_PANIC = 9,
} RcStatus;

/**
 * A finished run.
 */
typedef struct RcReport RcReport;

/**
 * A parsed scenario.
 */
typedef struct RcScenario RcScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Empty if none failed.
 * Valid until the next failing call on the same thread.
 */
const char *rc_last_error_message(void);

/**
 * Parses a TOML scenario.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum RcStatus rc_scenario_from_toml(const char *toml, struct RcScenario **out);

/**
 * # Safety
 * `scenario` must come from [`rc_scenario_from_toml`].
 */
enum RcStatus rc_scenario_set_seed(struct RcScenario *scenario, uint64_t seed);

/**
 * # Safety
 * `scenario` must come from [`rc_scenario_from_toml`] and not be used
 * afterwards. Null is ignored.
 */
void rc_scenario_free(struct RcScenario *scenario);

/**
 * Runs a scenario to completion.
 *
 * # Safety
 * `scenario` must be a live handle and `out` a writable pointer.
 */
enum RcStatus rc_run(const struct RcScenario *scenario, struct RcReport **out);

/**
 * The report as JSON, owned by the report handle.
 *
 * # Safety
 * `report` must be a live handle or null.
 */
const char *rc_report_json(const struct RcReport *report);

/**
 * Writes whether the run passed every consistency check.
 *
 * # Safety
 * `report` must be a live handle and `out` a writable pointer.
 */
enum RcStatus rc_report_consistent(const struct RcReport *report, bool *out);

/**
 * Writes the number of divergence alarms raised during the run.
 *
 * # Safety
 * `report` must be a live handle and `out` a writable pointer.
 */
enum RcStatus rc_report_alarm_count(const struct RcReport *report, size_t *out);

/**
 * # Safety
 * `report` must come from [`rc_run`] and not be used afterwards. Null is
 * ignored.
 */
void rc_report_free(struct RcReport *report);

/**
 * Checks a canonically encoded block against its expected sequence
 * number, predecessor hash and orderer key.
 *
 * # Safety
 * `block` must point to `len` readable bytes; `prev_hash` and
 * `orderer_key` to 32 bytes each.
 */
enum RcStatus rc_block_verify(const uint8_t *block,
                              size_t len,
                              uint64_t expected_seq,
                              const uint8_t *prev_hash,
                              const uint8_t *orderer_key);

/**
 * Library version, static.
 */
const char *rc_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RELCHAIN_H */
