#ifndef RISKMODEL_H
#define RISKMODEL_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RmStatus {
  RM_STATUS_OK = 0,
  RM_STATUS_NULL_POINTER = 1,
  RM_STATUS_INVALID_INPUT = 2,
  RM_STATUS_INVALID_CONFIG = 3,
  RM_STATUS_DIMENSION_MISMATCH = 4,
  RM_STATUS_SINGLE_CLASS = 5,
  RM_STATUS_UNKNOWN_FEATURE = 6,
  RM_STATUS_NUMERICAL = 7,
  RM_STATUS_IO = 8,
  RM_STATUS_PARSE = 9,
  RM_STATUS_PANIC = 10,
} RmStatus;

typedef enum RmAlternative {
  RM_ALTERNATIVE_GREATER = 0,
  RM_ALTERNATIVE_LESS = 1,
  RM_ALTERNATIVE_TWO_SIDED = 2,
} RmAlternative;

/**
 * Opaque dataset handle.
 */
typedef struct RmDataset RmDataset;

/**
 * Opaque fitted model handle.
 */
typedef struct RmModel RmModel;

typedef struct RmGbtConfig {
  double learning_rate;
  double subsample;
  size_t max_leaves;
  size_t max_depth;
  double gamma;
  double colsample_bytree;
  double min_child_weight;
  size_t n_estimators;
  double lambda;
  size_t min_samples_leaf;
  uint64_t seed;
} RmGbtConfig;

typedef struct RmMetrics {
  double accuracy;
  double auc;
  double recall;
  double precision;
  double f1;
} RmMetrics;

typedef struct RmTestResult {
  double statistic;
  double p_value;
  size_t n_effective;
  /**
   * 1 when the exact null distribution was used, 0 for the normal
   * approximation.
   */
  int32_t exact;
} RmTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *rm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rm_version(void);

/**
 * Builds a dataset from row-major `values` (NaN marks a missing cell) and
 * 0/1 `target`. `names` may be NULL, giving `f1..fn`.
 *
 * # Safety
 * `values` must hold `n_rows * n_features` doubles, `target` `n_rows`
 * bytes and `names`, if not NULL, `n_features` C strings.
 */
enum RmStatus rm_dataset_new(const double *values,
                             const uint8_t *target,
                             size_t n_rows,
                             size_t n_features,
                             const char *const *names,
                             struct RmDataset **out);

/**
 * Reads a CSV file whose column `target` holds the 0/1 label.
 *
 * # Safety
 * `path` and `target` must be NUL-terminated strings.
 */
enum RmStatus rm_dataset_load_csv(const char *path, const char *target, struct RmDataset **out);

/**
 * Generates a synthetic credit-style dataset.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RmStatus rm_dataset_synth(size_t n_rows,
                               size_t n_informative,
                               size_t n_redundant,
                               size_t n_noise,
                               double positive_rate,
                               double missing_rate,
                               uint64_t seed,
                               struct RmDataset **out);

/**
 * Drops mostly-missing columns, imputes medians and standardises, with
 * all statistics taken from `ds` itself.
 *
 * # Safety
 * `ds` must come from this library; `out` must be valid.
 */
enum RmStatus rm_dataset_preprocess(const struct RmDataset *ds, struct RmDataset **out);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or come from this library.
 */
size_t rm_dataset_n_rows(const struct RmDataset *ds);

/**
 * Number of feature columns, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or come from this library.
 */
size_t rm_dataset_n_features(const struct RmDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or come from this library and not be freed twice.
 */
void rm_dataset_free(struct RmDataset *ds);

/**
 * Default boosting settings.
 */
struct RmGbtConfig rm_gbt_config_default(void);

/**
 * Fits a logistic regression. The dataset must have no missing cells.
 *
 * # Safety
 * `ds` must come from this library; `out` must be valid.
 */
enum RmStatus rm_train_logistic(const struct RmDataset *ds, struct RmModel **out);

/**
 * Fits a boosted tree ensemble. `config` may be NULL for the defaults.
 *
 * # Safety
 * `ds` must come from this library; `config` NULL or valid; `out` valid.
 */
enum RmStatus rm_train_gbt(const struct RmDataset *ds,
                           const struct RmGbtConfig *config,
                           struct RmModel **out);

/**
 * Writes one probability per row of `ds` into `probs`, which must have
 * room for `len` values with `len == rm_dataset_n_rows(ds)`. Columns are
 * matched to the model by name.
 *
 * # Safety
 * Handles must come from this library; `probs` must hold `len` doubles.
 */
enum RmStatus rm_model_predict(const struct RmModel *model,
                               const struct RmDataset *ds,
                               double *probs,
                               size_t len);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum RmStatus rm_model_save(const struct RmModel *model, const char *path);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
enum RmStatus rm_model_load(const char *path, struct RmModel **out);

/**
 * Number of input features the model expects, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
size_t rm_model_n_features(const struct RmModel *model);

/**
 * # Safety
 * `model` must be NULL or come from this library and not be freed twice.
 */
void rm_model_free(struct RmModel *model);

/**
 * Area under the ROC curve, ties counted as one half.
 *
 * # Safety
 * `labels` and `scores` must hold `n` values; `out` must be valid.
 */
enum RmStatus rm_roc_auc(const uint8_t *labels, const double *scores, size_t n, double *out);

/**
 * Threshold metrics at 0.5 plus AUC.
 *
 * # Safety
 * `labels` and `probs` must hold `n` values; `out` must be valid.
 */
enum RmStatus rm_metrics(const uint8_t *labels,
                         const double *probs,
                         size_t n,
                         struct RmMetrics *out);

/**
 * Signed-rank test of the paired differences `a - b`.
 *
 * # Safety
 * `a` and `b` must hold `n` doubles; `out` must be valid.
 */
enum RmStatus rm_wilcoxon(const double *a,
                          const double *b,
                          size_t n,
                          enum RmAlternative alternative,
                          struct RmTestResult *out);

/**
 * Per-comparison level `alpha / m`.
 *
 * # Safety
 * `out` must be valid.
 */
enum RmStatus rm_bonferroni_alpha(double alpha, size_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKMODEL_H */
