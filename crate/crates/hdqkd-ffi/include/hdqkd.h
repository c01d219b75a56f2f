/* C ABI for the hdqkd 16-dimensional BB84 simulator. */

#ifndef HDQKD_H
#define HDQKD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum HdqkdStatus {
  HDQKD_STATUS_OK = 0,
  HDQKD_STATUS_NULL_POINTER = 1,
  HDQKD_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The requested value is undefined for this input (e.g. QBER of an
   * empty sifted set).
   */
  HDQKD_STATUS_UNDEFINED = 3,
  HDQKD_STATUS_RUNTIME_ERROR = 4,
} HdqkdStatus;

/**
 * Opaque MUB family handle.
 */
typedef struct HdqkdMubFamily HdqkdMubFamily;

/**
 * Opaque session configuration handle.
 */
typedef struct HdqkdSessionConfig HdqkdSessionConfig;

/**
 * Opaque session log handle.
 */
typedef struct HdqkdSessionLog HdqkdSessionLog;

/**
 * Opaque sift result handle.
 */
typedef struct HdqkdSiftResult HdqkdSiftResult;

/**
 * Exact verification report, plain data.
 */
typedef struct HdqkdMubReport {
  /**
   * 1 when every check passed.
   */
  uint8_t passed;
  uint64_t basis_pairs_checked;
  uint64_t cross_pairs_checked;
  double worst_deviation;
} HdqkdMubReport;

/**
 * Plain counts of a sift result.
 */
typedef struct HdqkdSiftCounts {
  uint64_t raw_detections;
  uint64_t sifted_detections;
  uint64_t n_correct;
  uint64_t n_incorrect;
} HdqkdSiftCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message for this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length in bytes, excluding
 * the terminator.
 *
 * # Safety
 * `buf` must point to at least `cap` writable bytes, or be NULL with
 * `cap == 0` to query the length.
 */
size_t hdqkd_last_error_message(char *buf, size_t cap);

/**
 * Frees a string allocated by this library.
 *
 * # Safety
 * `s` must have been returned by an hdqkd function and not freed before.
 */
void hdqkd_string_free(char *s);

/**
 * Creates the built-in 16-dimensional family.
 */
struct HdqkdMubFamily *hdqkd_mub_builtin16_new(void);

/**
 * Creates the two-dimensional test family {computational, diagonal}.
 */
struct HdqkdMubFamily *hdqkd_mub_qubit_new(void);

/**
 * # Safety
 * `family` must be a handle from a `hdqkd_mub_*_new` call, not yet freed.
 */
void hdqkd_mub_free(struct HdqkdMubFamily *family);

/**
 * Runs the exact integer verification.
 *
 * # Safety
 * `family` and `out` must be valid pointers.
 */
enum HdqkdStatus hdqkd_mub_verify(const struct HdqkdMubFamily *family, struct HdqkdMubReport *out);

/**
 * Ideal detection probability `|<bob|alice>|^2` between two family states.
 * Basis labels: 0 = alpha, 1 = alpha_prime.
 *
 * # Safety
 * `family` and `out` must be valid pointers.
 */
enum HdqkdStatus hdqkd_detection_probability_ideal(const struct HdqkdMubFamily *family,
                                                   uint32_t basis_alice,
                                                   size_t k_alice,
                                                   uint32_t basis_bob,
                                                   size_t k_bob,
                                                   double *out);

/**
 * Click probability of the physical (diffraction + pinhole) model at the
 * default geometry with the given pinhole diameter.
 *
 * # Safety
 * `family` and `out` must be valid pointers.
 */
enum HdqkdStatus hdqkd_pinhole_click_probability(const struct HdqkdMubFamily *family,
                                                 uint32_t basis_alice,
                                                 size_t k_alice,
                                                 uint32_t basis_bob,
                                                 size_t k_bob,
                                                 double pinhole_diameter_m,
                                                 double *out);

/**
 * `(1 - 1/sqrt(D)) / 2`, the individual-attack error bound.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HdqkdStatus hdqkd_threshold_individual(size_t dim, double *out);

/**
 * Collective-attack error bound (root of the key rate).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HdqkdStatus hdqkd_threshold_coherent(size_t dim, double *out);

/**
 * Secret fraction against collective attacks at error rate `qber`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HdqkdStatus hdqkd_key_rate_collective(double qber, size_t dim, double *out);

/**
 * Shannon entropy in bits of a histogram; `Undefined` when all counts are 0.
 *
 * # Safety
 * `counts` must point to `len` readable u64 values; `out` must be valid.
 */
enum HdqkdStatus hdqkd_shannon_entropy(const uint64_t *counts, size_t len, double *out);

/**
 * Creates an ideal-model config. `preset`: 0 selects mu = 0.60 / 50 ns,
 * 1 selects mu = 0.18 / 20 ns. Returns NULL on invalid arguments.
 */
struct HdqkdSessionConfig *hdqkd_session_config_new(size_t dim,
                                                    uint32_t preset,
                                                    uint64_t cycles,
                                                    uint64_t seed_alice,
                                                    uint64_t seed_bob,
                                                    uint64_t seed_channel);

/**
 * # Safety
 * `config` must be a handle from `hdqkd_session_config_new`, not yet freed.
 */
void hdqkd_session_config_free(struct HdqkdSessionConfig *config);

/**
 * Overrides the overall efficiency eta.
 *
 * # Safety
 * `config` must be a valid handle.
 */
enum HdqkdStatus hdqkd_session_config_set_eta(struct HdqkdSessionConfig *config, double eta);

/**
 * Sets the noise knobs: per-pulse phase jitter (radians) and background
 * click probability per gate.
 *
 * # Safety
 * `config` must be a valid handle.
 */
enum HdqkdStatus hdqkd_session_config_set_noise(struct HdqkdSessionConfig *config,
                                                double phase_jitter_rad,
                                                double background_click_prob);

/**
 * Runs the full session. Returns NULL on failure (see
 * `hdqkd_last_error_message`).
 *
 * # Safety
 * `config` must be a valid handle.
 */
struct HdqkdSessionLog *hdqkd_session_run(const struct HdqkdSessionConfig *config);

/**
 * # Safety
 * `log` must be a handle from `hdqkd_session_run`, not yet freed.
 */
void hdqkd_session_log_free(struct HdqkdSessionLog *log);

/**
 * Session log as CSV (`clock,alice_basis,alice_k,bob_basis,bob_k,click`).
 * Free with `hdqkd_string_free`.
 *
 * # Safety
 * `log` must be a valid handle.
 */
char *hdqkd_session_log_to_csv(const struct HdqkdSessionLog *log);

/**
 * Basis reconciliation over the log.
 *
 * # Safety
 * `log` must be a valid handle.
 */
struct HdqkdSiftResult *hdqkd_sift(const struct HdqkdSessionLog *log);

/**
 * # Safety
 * `result` must be a handle from `hdqkd_sift`, not yet freed.
 */
void hdqkd_sift_result_free(struct HdqkdSiftResult *result);

/**
 * # Safety
 * `result` and `out` must be valid pointers.
 */
enum HdqkdStatus hdqkd_sift_counts(const struct HdqkdSiftResult *result,
                                   struct HdqkdSiftCounts *out);

/**
 * Measured QBER; `Undefined` when the sifted set is empty.
 *
 * # Safety
 * `result` and `out` must be valid pointers.
 */
enum HdqkdStatus hdqkd_sift_qber(const struct HdqkdSiftResult *result, double *out);

/**
 * Histogram of the correct sifted symbols into `counts[0..dim]`.
 *
 * # Safety
 * `result` must be valid; `counts` must point to `len >= dim` writable u64.
 */
enum HdqkdStatus hdqkd_sift_symbol_counts(const struct HdqkdSiftResult *result,
                                          uint64_t *counts,
                                          size_t len);

/**
 * Full security report as a JSON document (thresholds, entropy, rates,
 * verdict). Rates use the logical session duration (cycles at the pulse
 * repetition rate). Free with `hdqkd_string_free`.
 *
 * # Safety
 * `result` and `config` must be valid handles.
 */
char *hdqkd_security_report_json(const struct HdqkdSiftResult *result,
                                 const struct HdqkdSessionConfig *config);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HDQKD_H */
