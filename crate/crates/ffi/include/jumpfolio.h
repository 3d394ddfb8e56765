#ifndef JUMPFOLIO_H
#define JUMPFOLIO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Solver for [`jf_optimize`].
 */
typedef enum JfMethod {
  /**
   * Closed form with jump mgfs at the unconstrained optimum.
   */
  JF_METHOD_CLOSED_FORM = 0,
  /**
   * Closed form with jump mgfs at unit exposure.
   */
  JF_METHOD_CLOSED_FORM_UNIT = 1,
  /**
   * Bisection with every constant evaluated at the trial weights.
   */
  JF_METHOD_BISECTION = 2,
} JfMethod;

/**
 * Result code of every fallible call. Values 2–4 match the command-line exit codes.
 */
typedef enum JfStatus {
  JF_STATUS_OK = 0,
  JF_STATUS_NULL_POINTER = 1,
  JF_STATUS_INVALID_INPUT = 2,
  JF_STATUS_INFEASIBLE = 3,
  JF_STATUS_DEGENERATE = 4,
  JF_STATUS_PANIC = 99,
} JfStatus;

/**
 * Opaque market parameters.
 */
typedef struct JfMarket JfMarket;

/**
 * Opaque portfolio: weights and endowment schedule.
 */
typedef struct JfPortfolio JfPortfolio;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *jf_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next failing call
 * on the same thread.
 */
const char *jf_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer returned by this library that was not freed yet.
 */
void jf_string_free(char *s);

/**
 * Parses market parameters from a JSON document (portfolio fields are ignored).
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out_market` a writable pointer.
 */
enum JfStatus jf_market_from_json(const char *json, struct JfMarket **out_market);

/**
 * Number of risky assets; 0 for NULL.
 *
 * # Safety
 * `market` must be NULL or a live handle.
 */
size_t jf_market_dim(const struct JfMarket *market);

/**
 * # Safety
 * `market` must be NULL or a handle from [`jf_market_from_json`] not freed yet.
 */
void jf_market_free(struct JfMarket *market);

/**
 * Creates a portfolio from `m` weights and `tau` endowments `α_0..α_{τ−1}`.
 *
 * # Safety
 * `weights` and `endowments` must point to `m` and `tau` readable doubles.
 */
enum JfStatus jf_portfolio_new(const double *weights,
                               size_t m,
                               const double *endowments,
                               size_t tau,
                               struct JfPortfolio **out_portfolio);

/**
 * # Safety
 * `portfolio` must be NULL or a handle from [`jf_portfolio_new`] not freed yet.
 */
void jf_portfolio_free(struct JfPortfolio *portfolio);

/**
 * Bound constants as a JSON object; free the string with [`jf_string_free`].
 *
 * # Safety
 * Handles must be live; `out_json` must be writable.
 */
enum JfStatus jf_bound_constants_json(const struct JfMarket *market,
                                      const struct JfPortfolio *portfolio,
                                      double p,
                                      char **out_json);

/**
 * `CVaR_{1−p}(−W'^L)` of the linearized comonotonic lower bound.
 *
 * # Safety
 * Handles must be live; `out_value` must be writable.
 */
enum JfStatus jf_cvar_bound(const struct JfMarket *market,
                            const struct JfPortfolio *portfolio,
                            double p,
                            double *out_value);

/**
 * `E[W'^L]` of the linearized comonotonic lower bound.
 *
 * # Safety
 * Handles must be live; `out_value` must be writable.
 */
enum JfStatus jf_expected_bound(const struct JfMarket *market,
                                const struct JfPortfolio *portfolio,
                                double *out_value);

/**
 * Simulates `n_paths` terminal wealths into `out_samples` (length `n_paths`).
 * Output depends only on the inputs and `seed`, never on the thread count.
 *
 * # Safety
 * Handles must be live; `out_samples` must hold `n_paths` writable doubles.
 */
enum JfStatus jf_simulate_terminal_wealth(const struct JfMarket *market,
                                          const struct JfPortfolio *portfolio,
                                          size_t n_paths,
                                          uint64_t seed,
                                          double *out_samples);

/**
 * Optimal constant-mix weights for stop-loss rate `k_star` at tail level `p`.
 * Writes `m` weights and the Kelly-ray fraction `q`.
 *
 * # Safety
 * `market` must be live; `endowments` must hold `tau` doubles and `out_weights` `m` doubles
 * where `m` is the market dimension; `out_q` must be writable.
 */
enum JfStatus jf_optimize(const struct JfMarket *market,
                          const double *endowments,
                          size_t tau,
                          double p,
                          double k_star,
                          enum JfMethod method,
                          double *out_weights,
                          size_t m,
                          double *out_q);

/**
 * Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
 *
 * # Safety
 * `out_value` must be writable.
 */
enum JfStatus jf_normal_quantile(double p, double *out_value);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* JUMPFOLIO_H */
