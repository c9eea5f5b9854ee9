#ifndef DDOSNET_H
#define DDOSNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DDOSNET_OK 0

#define DDOSNET_ERR_NULL_POINTER 1

#define DDOSNET_ERR_CONFIG 2

#define DDOSNET_ERR_DATA 3

#define DDOSNET_ERR_NUMERIC 4

#define DDOSNET_ERR_INVALID_ARGUMENT 5

#define DDOSNET_ERR_PANIC 6

/**
 * Class codes used in label arrays.
 */
#define DDOSNET_LABEL_BENIGN 0

#define DDOSNET_LABEL_ATTACK 1

/**
 * A loaded model.
 */
typedef struct DdosnetModel DdosnetModel;

/**
 * A loaded min-max scaler.
 */
typedef struct DdosnetScaler DdosnetScaler;

/**
 * Per-class precision, recall and F-score with Attack as the positive class.
 */
typedef struct DdosnetMetrics {
  double precision_attack;
  double recall_attack;
  double f1_attack;
  double precision_benign;
  double recall_benign;
  double f1_benign;
  double accuracy;
  uint64_t true_positive;
  uint64_t false_positive;
  uint64_t true_negative;
  uint64_t false_negative;
} DdosnetMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ddosnet_last_error(void);

/**
 * Loads a model file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
int32_t ddosnet_model_load(const char *path, struct DdosnetModel **out);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `ddosnet_model_load` and not be used afterwards.
 */
void ddosnet_model_free(struct DdosnetModel *model);

/**
 * Number of input features per record (sequence length × step width), or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ddosnet_model_feature_count(const struct DdosnetModel *model);

/**
 * Scores `n_records` scaled records laid out row-major in `features`.
 * Writes the attack probability to `scores` and the 0/1 label to `labels`
 * (either output may be null).
 *
 * # Safety
 * `features` must hold `n_records * n_features` values; non-null outputs
 * must hold `n_records` elements.
 */
int32_t ddosnet_model_predict(const struct DdosnetModel *model,
                              const double *features,
                              size_t n_records,
                              size_t n_features,
                              double *scores,
                              uint8_t *labels);

/**
 * Loads a scaler file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
int32_t ddosnet_scaler_load(const char *path, struct DdosnetScaler **out);

/**
 * Releases a scaler handle. Null is ignored.
 *
 * # Safety
 * `scaler` must come from `ddosnet_scaler_load` and not be used afterwards.
 */
void ddosnet_scaler_free(struct DdosnetScaler *scaler);

/**
 * Number of features the scaler was fitted on, or 0 for null.
 *
 * # Safety
 * `scaler` must be null or a live handle.
 */
size_t ddosnet_scaler_feature_count(const struct DdosnetScaler *scaler);

/**
 * Min-max scales `n_records` row-major records in place.
 *
 * # Safety
 * `features` must hold `n_records * n_features` values.
 */
int32_t ddosnet_scaler_apply(const struct DdosnetScaler *scaler,
                             double *features,
                             size_t n_records,
                             size_t n_features);

/**
 * Area under the ROC curve for 0/1 labels and attack scores.
 *
 * # Safety
 * `labels` and `scores` must hold `n` elements; `out` must be writable.
 */
int32_t ddosnet_auc(const uint8_t *labels, const double *scores, size_t n, double *out);

/**
 * Confusion counts and per-class metrics for predicted against true labels.
 *
 * # Safety
 * `labels_true` and `labels_pred` must hold `n` elements; `out` must be writable.
 */
int32_t ddosnet_metrics(const uint8_t *labels_true,
                        const uint8_t *labels_pred,
                        size_t n,
                        struct DdosnetMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDOSNET_H */
