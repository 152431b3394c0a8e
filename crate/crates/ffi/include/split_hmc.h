#ifndef SPLIT_HMC_H
#define SPLIT_HMC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum ShmcStatus {
  SHMC_STATUS_OK = 0,
  SHMC_STATUS_NULL_POINTER = 1,
  SHMC_STATUS_INVALID_ARGUMENT = 2,
  SHMC_STATUS_DIMENSION_MISMATCH = 3,
  SHMC_STATUS_NOT_POSITIVE_DEFINITE = 4,
  SHMC_STATUS_NO_CONVERGENCE = 5,
  SHMC_STATUS_NON_FINITE = 6,
  SHMC_STATUS_UNSTABLE = 7,
  SHMC_STATUS_IO = 8,
  SHMC_STATUS_PARSE = 9,
  SHMC_STATUS_BUFFER_TOO_SMALL = 10,
  SHMC_STATUS_PANIC = 11,
} ShmcStatus;

typedef enum ShmcMethod {
  SHMC_METHOD_KDK = 0,
  SHMC_METHOD_UNCOND_KRK = 1,
  SHMC_METHOD_PRECOND_VERLET = 2,
  SHMC_METHOD_PRECOND_KRK = 3,
  SHMC_METHOD_PRECOND_RKR = 4,
} ShmcMethod;

/**
 * One-step schemes of the scalar model problem.
 */
typedef enum ShmcScheme {
  SHMC_SCHEME_KRK = 0,
  SHMC_SCHEME_RKR = 1,
  SHMC_SCHEME_KDK = 2,
} ShmcScheme;

/**
 * Recorded chain.
 */
typedef struct ShmcChain ShmcChain;

/**
 * Quadratic reference at the posterior mode.
 */
typedef struct ShmcReference ShmcReference;

/**
 * Logistic-regression posterior.
 */
typedef struct ShmcTarget ShmcTarget;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * Valid until the next call into this library on the same thread.
 */
const char *shmc_last_error(void);

/**
 * Simulated logistic-regression posterior with `n` rows and `d_minus_1`
 * features.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum ShmcStatus shmc_target_simdata(uint64_t seed,
                                    size_t n,
                                    size_t d_minus_1,
                                    double gamma2,
                                    double prior_variance,
                                    struct ShmcTarget **out);

/**
 * Posterior for a CSV file or JSON manifest.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as for [`shmc_target_simdata`].
 */
enum ShmcStatus shmc_target_from_file(const char *path,
                                      double prior_variance,
                                      struct ShmcTarget **out);

/**
 * Parameter dimension `d` (features plus intercept), or 0 for null.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t shmc_target_dim(const struct ShmcTarget *t);

/**
 * Number of data rows, or 0 for null.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t shmc_target_rows(const struct ShmcTarget *t);

/**
 * Potential `U(θ)`.
 *
 * # Safety
 * `theta` must point to `len` doubles; `out` to one.
 */
enum ShmcStatus shmc_target_potential(const struct ShmcTarget *t,
                                      const double *theta,
                                      size_t len,
                                      double *out);

/**
 * Gradient `∇U(θ)` into `grad` (length `len`).
 *
 * # Safety
 * `theta` and `grad` must each point to `len` doubles.
 */
enum ShmcStatus shmc_target_gradient(const struct ShmcTarget *t,
                                     const double *theta,
                                     size_t len,
                                     double *grad);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void shmc_target_free(struct ShmcTarget *t);

/**
 * MAP point, Hessian and factorizations, starting the search at zero.
 *
 * # Safety
 * `t` must be a live handle; `out` writable.
 */
enum ShmcStatus shmc_reference_build(const struct ShmcTarget *t, struct ShmcReference **out);

/**
 * # Safety
 * `r` must be null or a live handle.
 */
size_t shmc_reference_dim(const struct ShmcReference *r);

/**
 * Ascending rotation frequencies into `out` (capacity `len`).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum ShmcStatus shmc_reference_frequencies(const struct ShmcReference *r, double *out, size_t len);

/**
 * MAP point into `out` (capacity `len`).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum ShmcStatus shmc_reference_mode(const struct ShmcReference *r, double *out, size_t len);

/**
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void shmc_reference_free(struct ShmcReference *r);

/**
 * Runs `n_samples` HMC transitions from the mode. `reference` may be null
 * only for [`ShmcMethod::Kdk`], which then starts at zero.
 *
 * # Safety
 * Handles must be live (or `reference` null); `out` writable.
 */
enum ShmcStatus shmc_chain_run(const struct ShmcTarget *t,
                               const struct ShmcReference *reference,
                               enum ShmcMethod method,
                               double eps_bar,
                               size_t steps,
                               size_t n_samples,
                               uint64_t seed,
                               struct ShmcChain **out);

/**
 * # Safety
 * `c` must be null or a live handle.
 */
size_t shmc_chain_samples_count(const struct ShmcChain *c);

/**
 * # Safety
 * `c` must be null or a live handle.
 */
size_t shmc_chain_dim(const struct ShmcChain *c);

/**
 * # Safety
 * `c` must be null or a live handle.
 */
double shmc_chain_acceptance_rate(const struct ShmcChain *c);

/**
 * # Safety
 * `c` must be null or a live handle.
 */
uint64_t shmc_chain_grad_evals(const struct ShmcChain *c);

/**
 * Row-major `samples × dim` values into `out` (capacity `len`).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum ShmcStatus shmc_chain_samples(const struct ShmcChain *c, double *out, size_t len);

/**
 * Per-sample accept flags (0/1) into `out` (capacity `len`).
 *
 * # Safety
 * `out` must point to `len` writable bytes.
 */
enum ShmcStatus shmc_chain_accepted(const struct ShmcChain *c, uint8_t *out, size_t len);

/**
 * Per-sample energy errors into `out` (capacity `len`); divergences are `+inf`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum ShmcStatus shmc_chain_energy_errors(const struct ShmcChain *c, double *out, size_t len);

/**
 * # Safety
 * `c` must be null or a handle not yet freed.
 */
void shmc_chain_free(struct ShmcChain *c);

/**
 * Integrated autocorrelation time of a series (window constant 5).
 *
 * # Safety
 * `values` must point to `len` doubles; `out` to one.
 */
enum ShmcStatus shmc_iac(const double *values, size_t len, double *out);

/**
 * `ρ(ε, κ)` of the scalar model problem.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum ShmcStatus shmc_model_rho(enum ShmcScheme scheme, double eps, double kappa, double *out);

/**
 * Largest stable step of the scalar model problem (`+inf` if unbounded).
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum ShmcStatus shmc_model_stability_limit(enum ShmcScheme scheme, double kappa, double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *shmc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLIT_HMC_H */
