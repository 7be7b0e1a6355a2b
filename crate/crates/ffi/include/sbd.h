#ifndef SBD_H
#define SBD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbdStatus {
  SBD_STATUS_OK = 0,
  SBD_STATUS_NULL_POINTER = 1,
  SBD_STATUS_INVALID_ARGUMENT = 2,
  SBD_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * A linear system could not be solved (coincident samples, no
   * positive-definite correlation matrix).
   */
  SBD_STATUS_SINGULAR = 4,
  SBD_STATUS_NOT_CONVERGED = 5,
  SBD_STATUS_RUNTIME = 6,
  SBD_STATUS_PANIC = 7,
} SbdStatus;

typedef enum SbdModelKind {
  SBD_MODEL_KIND_RBFN = 0,
  SBD_MODEL_KIND_SVR = 1,
  SBD_MODEL_KIND_KRIGING = 2,
} SbdModelKind;

typedef enum SbdOptimizer {
  SBD_OPTIMIZER_PSO = 0,
  SBD_OPTIMIZER_DE = 1,
} SbdOptimizer;

/**
 * Opaque fitted surrogate.
 */
typedef struct SbdModel SbdModel;

/**
 * Opaque training database.
 */
typedef struct SbdTrainingSet SbdTrainingSet;

/**
 * Objective callback: cost of the `dims`-vector `x`. Called serially.
 */
typedef double (*SbdObjective)(const double *x, size_t dims, void *user);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *sbd_last_error_message(void);

/**
 * Percentage of true evaluations saved by `s` simulations against `p * i`.
 */
enum SbdStatus sbd_time_saving(size_t p, size_t i, size_t s, double *out);

enum SbdStatus sbd_budget_from_saving(size_t p, size_t i, double saving, size_t *out);

/**
 * Evaluate a named benchmark (`levy`, `schwefel`, `ackley`).
 */
enum SbdStatus sbd_benchmark_eval(const char *name, const double *x, size_t dims, double *out);

/**
 * Ripple cost of an `n_elements` time-modulated array with Dolph-Chebyshev
 * durations at `sll_db` (negative dB), for the `n_elements / 2` switch-on
 * instants.
 */
enum SbdStatus sbd_tma_cost(size_t n_elements,
                            double sll_db,
                            const double *omega,
                            size_t dims,
                            double *out);

struct SbdTrainingSet *sbd_training_set_new(size_t dims);

void sbd_training_set_free(struct SbdTrainingSet *set);

/**
 * Add a sample; a repeated input replaces the earlier cost.
 */
enum SbdStatus sbd_training_set_push(struct SbdTrainingSet *set,
                                     const double *x,
                                     size_t dims,
                                     double cost);

size_t sbd_training_set_len(const struct SbdTrainingSet *set);

/**
 * Fit a surrogate with default hyperparameters.
 */
enum SbdStatus sbd_model_fit(const struct SbdTrainingSet *set,
                             enum SbdModelKind kind,
                             struct SbdModel **out);

/**
 * Predicted cost and, for Kriging, its standard deviation (NaN for the
 * other families). `confidence` may be null.
 */
enum SbdStatus sbd_model_predict(const struct SbdModel *model,
                                 const double *x,
                                 size_t dims,
                                 double *value,
                                 double *confidence);

void sbd_model_free(struct SbdModel *model);

/**
 * Run PSO or DE on the callback objective over the box
 * `[lower, upper]`. `best` receives `dims` values; `true_evals` may be
 * null.
 */
enum SbdStatus sbd_optimize(enum SbdOptimizer optimizer,
                            SbdObjective objective,
                            void *user,
                            const double *lower,
                            const double *upper,
                            size_t dims,
                            size_t agents,
                            size_t iterations,
                            uint64_t seed,
                            double *best,
                            double *best_cost,
                            size_t *true_evals);

/**
 * Confidence-driven surrogate PSO with at most `s` calls to the objective,
 * `s0` of them on the initial design.
 */
enum SbdStatus sbd_pso_ok_c(SbdObjective objective,
                            void *user,
                            const double *lower,
                            const double *upper,
                            size_t dims,
                            size_t agents,
                            size_t iterations,
                            size_t s0,
                            size_t s,
                            double zeta,
                            uint64_t seed,
                            double *best,
                            double *best_cost,
                            size_t *true_evals);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBD_H */
