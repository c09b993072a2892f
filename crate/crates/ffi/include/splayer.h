#ifndef SPLAYER_H
#define SPLAYER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum SplStatus {
  SPL_STATUS_OK = 0,
  /**
   * Invalid configuration or argument.
   */
  SPL_STATUS_CONFIG = 1,
  /**
   * Training produced a non-finite loss or gradient.
   */
  SPL_STATUS_DIVERGENCE = 2,
  /**
   * File, checkpoint or serialization failure.
   */
  SPL_STATUS_IO = 3,
  /**
   * A required pointer argument was null.
   */
  SPL_STATUS_NULL_POINTER = 4,
  /**
   * An output buffer is too small.
   */
  SPL_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * The library panicked; the handle involved should be freed.
   */
  SPL_STATUS_PANIC = 6,
} SplStatus;

/**
 * Training configuration handle.
 */
typedef struct SplConfig SplConfig;

/**
 * Trained composite model handle.
 */
typedef struct SplModel SplModel;

/**
 * Finished training run handle.
 */
typedef struct SplRun SplRun;

/**
 * One logged epoch.
 */
typedef struct SplLossRecord {
  uint64_t epoch;
  double total;
  double residual;
  double boundary;
  double lr;
} SplLossRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length
 * excluding the NUL. Returns 0 when no error has been recorded.
 */
size_t spl_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *spl_version(void);

/**
 * Creates the default configuration for `problem` (for example `"cd1d"`)
 * and `variant` (`"pinn"`, `"pipinn"` or `"cpinn"`).
 */
enum SplStatus spl_config_new(const char *problem, const char *variant, struct SplConfig **out);

void spl_config_free(struct SplConfig *config);

enum SplStatus spl_config_set_epsilon(struct SplConfig *config, double epsilon);

/**
 * Sets the second perturbation parameter of the coupled problems.
 */
enum SplStatus spl_config_set_mu(struct SplConfig *config, double mu);

/**
 * Sets the epoch count. The logging interval is clamped to it.
 */
enum SplStatus spl_config_set_epochs(struct SplConfig *config, size_t epochs);

enum SplStatus spl_config_set_lr(struct SplConfig *config, double lr);

/**
 * Multiplies the learning rate by `factor` every `every` epochs.
 */
enum SplStatus spl_config_set_lr_decay(struct SplConfig *config, double factor, size_t every);

enum SplStatus spl_config_set_seed(struct SplConfig *config, uint64_t seed);

enum SplStatus spl_config_set_points(struct SplConfig *config, size_t collocation, size_t per_face);

enum SplStatus spl_config_set_log_every(struct SplConfig *config, size_t every);

enum SplStatus spl_config_set_widths(struct SplConfig *config, size_t outer, size_t inner);

enum SplStatus spl_config_set_resample(struct SplConfig *config, bool every_epoch);

/**
 * Trains a model. On success `*out` receives a run handle.
 */
enum SplStatus spl_train(const struct SplConfig *config, struct SplRun **out);

void spl_run_free(struct SplRun *run);

/**
 * Number of logged epochs; 0 for a null handle.
 */
size_t spl_run_record_count(const struct SplRun *run);

/**
 * Copies the logged epochs into `out`, which must hold at least
 * [`spl_run_record_count`] entries.
 */
enum SplStatus spl_run_records(const struct SplRun *run, struct SplLossRecord *out, size_t len);

/**
 * Metrics of a run. `l2_rel_error` and `max_abs_error` receive one value
 * per solution component and must hold at least `len` values; either may
 * be null to skip it.
 */
enum SplStatus spl_run_metrics(const struct SplRun *run,
                               double *final_loss,
                               double *l2_rel_error,
                               double *max_abs_error,
                               size_t len,
                               double *wall_time_seconds);

/**
 * Copies the trained model of a run into a new model handle.
 */
enum SplStatus spl_run_model(const struct SplRun *run, struct SplModel **out);

void spl_model_free(struct SplModel *model);

/**
 * Input dimension; 0 for a null handle.
 */
size_t spl_model_input_dim(const struct SplModel *model);

/**
 * Number of solution components; 0 for a null handle.
 */
size_t spl_model_n_components(const struct SplModel *model);

/**
 * Evaluates every component at the point `x` of dimension `dim`.
 */
enum SplStatus spl_model_eval(const struct SplModel *model,
                              const double *x,
                              size_t dim,
                              double *out,
                              size_t len);

/**
 * Value, gradient and second derivatives along each axis of one component
 * at `x`. `grad` and `hess_diag` must each hold `dim` values.
 */
enum SplStatus spl_model_eval_jet(const struct SplModel *model,
                                  const double *x,
                                  size_t dim,
                                  size_t component,
                                  double *value,
                                  double *grad,
                                  double *hess_diag);

/**
 * Writes a binary checkpoint of the model to `path`.
 */
enum SplStatus spl_model_save(const struct SplModel *model, const char *path);

/**
 * Reads a checkpoint written by [`spl_model_save`].
 */
enum SplStatus spl_model_load(const char *path, struct SplModel **out);

/**
 * Exact solution of a benchmark at `x`. Pass NaN for `mu` to use the
 * problem's default; it is ignored by the uncoupled problems.
 */
enum SplStatus spl_analytic_solution(const char *problem,
                                     double epsilon,
                                     double mu,
                                     const double *x,
                                     size_t dim,
                                     double *out,
                                     size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPLAYER_H */
