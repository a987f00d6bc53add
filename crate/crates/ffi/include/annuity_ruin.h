#ifndef ANNUITY_RUIN_H
#define ANNUITY_RUIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArStatus {
  AR_STATUS_OK = 0,
  AR_STATUS_NULL_POINTER = 1,
  AR_STATUS_INVALID_PARAMS = 2,
  AR_STATUS_DOMAIN = 3,
  /**
   * Charge on the wrong side of the critical charge for the requested regime.
   */
  AR_STATUS_REGIME = 4,
  /**
   * Investment rule undefined on a free boundary.
   */
  AR_STATUS_BOUNDARY = 5,
  /**
   * State is in the purchase region; the output holds the income to buy.
   */
  AR_STATUS_PURCHASE_REGION = 6,
  /**
   * Root finding or another numerical step failed.
   */
  AR_STATUS_NUMERICAL = 7,
  /**
   * Simulation configuration or step size rejected.
   */
  AR_STATUS_CONFIG = 8,
  AR_STATUS_PANIC = 9,
} ArStatus;

typedef enum ArRegime {
  AR_REGIME_UNRESTRICTED = 0,
  AR_REGIME_RESTRICTED_HIGH = 1,
  AR_REGIME_RESTRICTED_LOW = 2,
} ArRegime;

/**
 * Opaque solved model.
 */
typedef struct ArSolution ArSolution;

/**
 * Model primitives, mirroring the Rust `ModelParams`.
 */
typedef struct ArParams {
  double r;
  double mu;
  double sigma;
  double lambda_s;
  double lambda_o;
  double c;
  double p;
} ArParams;

typedef struct ArSimConfig {
  uint64_t n_paths;
  double dt;
  double horizon;
  uint64_t seed;
  double income_cutoff;
} ArSimConfig;

typedef struct ArSimResult {
  double estimate;
  double std_err;
  uint64_t n_ruin;
  uint64_t n_safe;
  uint64_t n_censored;
} ArSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Base scenario with surrender charge `p`.
 */
struct ArParams ar_params_base(double p);

/**
 * Default simulation settings: 100000 paths, dt = 0.001, 200-year horizon.
 */
struct ArSimConfig ar_sim_config_default(void);

/**
 * Message for the last failed call on this thread. Valid until the next
 * call into this library from the same thread; never null.
 */
const char *ar_last_error(void);

/**
 * Static name of a status code.
 */
const char *ar_status_name(enum ArStatus status);

/**
 * Critical surrender charge for `params`.
 *
 * # Safety
 * `params` and `out` must be null or valid for reads and writes respectively.
 */
enum ArStatus ar_critical_charge(const struct ArParams *params, double *out);

/**
 * Solve for `params`; `restricted` keeps wealth non-negative. On success
 * `*out` owns a new handle, to be released with [`ar_solution_free`].
 *
 * # Safety
 * `params` must be null or valid for reads; `out` null or valid for writes.
 */
enum ArStatus ar_solution_new(const struct ArParams *params,
                              bool restricted,
                              struct ArSolution **out);

/**
 * Release a handle; null is ignored.
 *
 * # Safety
 * `solution` must be null or a handle from [`ar_solution_new`] not yet freed.
 */
void ar_solution_free(struct ArSolution *solution);

/**
 * # Safety
 * `solution` must be null or a live handle; `out` null or valid for writes.
 */
enum ArStatus ar_solution_regime(const struct ArSolution *solution, enum ArRegime *out);

/**
 * Wealth interval `[lo, hi]` at income `a`: ruin (or zero) to safe level.
 *
 * # Safety
 * `solution` must be null or a live handle; `lo`, `hi` null or valid for writes.
 */
enum ArStatus ar_wealth_domain(const struct ArSolution *solution, double a, double *lo, double *hi);

/**
 * Minimum probability of lifetime ruin at `(w, a)`.
 *
 * # Safety
 * `solution` must be null or a live handle; `out` null or valid for writes.
 */
enum ArStatus ar_psi(const struct ArSolution *solution, double w, double a, double *out);

/**
 * Optimal amount in the risky asset at `(w, a)`. In the purchase region
 * returns [`ArStatus::PurchaseRegion`] and writes the income to buy.
 *
 * # Safety
 * `solution` must be null or a live handle; `out` null or valid for writes.
 */
enum ArStatus ar_pi_star(const struct ArSolution *solution, double w, double a, double *out);

/**
 * Income bought immediately at `(w, a)`; zero outside the purchase region.
 *
 * # Safety
 * `solution` must be null or a live handle; `out` null or valid for writes.
 */
enum ArStatus ar_purchase_at(const struct ArSolution *solution, double w, double a, double *out);

/**
 * Monte Carlo estimate of the ruin probability from `(w, a)`.
 *
 * # Safety
 * `solution` must be null or a live handle; `config` null or valid for
 * reads; `out` null or valid for writes.
 */
enum ArStatus ar_simulate(const struct ArSolution *solution,
                          double w,
                          double a,
                          const struct ArSimConfig *config,
                          struct ArSimResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANNUITY_RUIN_H */
