#ifndef SUBHARMONIC_H
#define SUBHARMONIC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes of every fallible call.
 */
typedef enum SubhStatus {
  SUBH_STATUS_OK = 0,
  SUBH_STATUS_NULL_POINTER = 1,
  SUBH_STATUS_INVALID_ARGUMENT = 2,
  SUBH_STATUS_CONFIG = 3,
  SUBH_STATUS_PARSE = 4,
  SUBH_STATUS_EVALUATION = 5,
  SUBH_STATUS_NON_FINITE = 6,
  SUBH_STATUS_IO = 7,
  SUBH_STATUS_PANIC = 8,
} SubhStatus;

/*
 Outcome of a solve.
 */
typedef enum SubhSolveStatus {
  SUBH_SOLVE_STATUS_CONVERGED = 0,
  SUBH_SOLVE_STATUS_NON_CONVERGED = 1,
  SUBH_SOLVE_STATUS_DEGENERATE = 2,
} SubhSolveStatus;

/*
 A hypothesis audit report.
 */
typedef struct SubhAuditReport SubhAuditReport;

/*
 A validated run configuration.
 */
typedef struct SubhConfig SubhConfig;

/*
 A Hamiltonian `H(t, x)`.
 */
typedef struct SubhHamiltonian SubhHamiltonian;

/*
 The outcome of one solve.
 */
typedef struct SubhSolveResult SubhSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *subh_last_error(void);

/*
 Library version as a static string.
 */
const char *subh_version(void);

/*
 # Safety
 `s` must be null or a string returned by this library.
 */
void subh_string_free(char *s);

/*
 Parses a JSON run configuration; every omitted field takes its default.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum SubhStatus subh_config_from_json(const char *json, struct SubhConfig **out);

/*
 The fully resolved configuration as JSON.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_config_to_json(const struct SubhConfig *cfg, char **out);

/*
 # Safety
 `cfg` must be null or a handle from `subh_config_from_json`.
 */
void subh_config_free(struct SubhConfig *cfg);

/*
 The Hamiltonian described by a configuration.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_config_hamiltonian(const struct SubhConfig *cfg, struct SubhHamiltonian **out);

/*
 Parses an expression Hamiltonian on `ℝ^{2N}` with period `period`.

 # Safety
 `expression` must be a nul-terminated string and `out` a valid pointer.
 */
enum SubhStatus subh_hamiltonian_parse(const char *expression,
                                       double period,
                                       size_t half_dim,
                                       struct SubhHamiltonian **out);

/*
 Dimension `2N` of the phase space.

 # Safety
 `h` must be a live handle.
 */
size_t subh_hamiltonian_state_dim(const struct SubhHamiltonian *h);

/*
 `H(t, x)` with `x` of length `2N`.

 # Safety
 `h` must be a live handle, `x` must point to `len` doubles and `value`
 must be valid.
 */
enum SubhStatus subh_hamiltonian_eval(const struct SubhHamiltonian *h,
                                      double t,
                                      const double *x,
                                      size_t len,
                                      double *value);

/*
 `∇ₓH(t, x)` written to `grad` (length `2N`).

 # Safety
 `x` and `grad` must each point to `len` doubles.
 */
enum SubhStatus subh_hamiltonian_gradient(const struct SubhHamiltonian *h,
                                          double t,
                                          const double *x,
                                          size_t len,
                                          double *grad);

/*
 The time-reversed Hamiltonian `−H(−t, x)`.

 # Safety
 `h` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_hamiltonian_time_reverse(const struct SubhHamiltonian *h,
                                              struct SubhHamiltonian **out);

/*
 # Safety
 `h` must be null or a live handle.
 */
void subh_hamiltonian_free(struct SubhHamiltonian *h);

/*
 Searches for a `kT`-periodic solution of the configured Hamiltonian.
 A non-converged or degenerate outcome is still `SUBH_STATUS_OK`; query
 it with `subh_result_status`.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_solve(const struct SubhConfig *cfg, uint32_t k, struct SubhSolveResult **out);

/*
 # Safety
 `r` must be a live handle.
 */
enum SubhSolveStatus subh_result_status(const struct SubhSolveResult *r);

/*
 Critical level `C_k`; NaN for a null handle.

 # Safety
 `r` must be null or a live handle.
 */
double subh_result_level(const struct SubhSolveResult *r);

/*
 Final residual; NaN for a null handle.

 # Safety
 `r` must be null or a live handle.
 */
double subh_result_residual(const struct SubhSolveResult *r);

/*
 The full result, including the loop, as JSON.

 # Safety
 `r` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_result_to_json(const struct SubhSolveResult *r, char **out);

/*
 # Safety
 `r` must be null or a live handle.
 */
void subh_result_free(struct SubhSolveResult *r);

/*
 Runs a scan over `k_values` (or the configured values when `count` is 0)
 and returns the CSV report.

 # Safety
 `k_values` must point to `count` integers when `count > 0`; `out` must be
 valid.
 */
enum SubhStatus subh_scan_csv(const struct SubhConfig *cfg,
                              const uint32_t *k_values,
                              size_t count,
                              char **out);

/*
 Audits the configured Hamiltonian and `γ`.

 # Safety
 `cfg` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_audit(const struct SubhConfig *cfg, struct SubhAuditReport **out);

/*
 Whether any audit entry is VIOLATED.

 # Safety
 `rep` must be a live handle.
 */
bool subh_audit_any_violated(const struct SubhAuditReport *rep);

/*
 # Safety
 `rep` must be a live handle and `out` a valid pointer.
 */
enum SubhStatus subh_audit_to_json(const struct SubhAuditReport *rep, char **out);

/*
 # Safety
 `rep` must be null or a live handle.
 */
void subh_audit_free(struct SubhAuditReport *rep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBHARMONIC_H */
