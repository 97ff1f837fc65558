#ifndef REGGKM_H
#define REGGKM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RgkmStatus {
  RGKM_STATUS_OK = 0,
  RGKM_STATUS_NULL_POINTER = 1,
  RGKM_STATUS_INVALID_ARGUMENT = 2,
  RGKM_STATUS_DATA_ERROR = 3,
  RGKM_STATUS_NUMERICAL_ERROR = 4,
  RGKM_STATUS_IO_ERROR = 5,
  RGKM_STATUS_PANIC = 6,
} RgkmStatus;

/**
 * Survival data: times, event indicators and the two covariate blocks.
 */
typedef struct RgkmDataset RgkmDataset;

/**
 * A fitted kernel Cox model.
 */
typedef struct RgkmModel RgkmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library on the same thread.
 */
const char *rgkm_last_error_message(void);

/**
 * Builds a dataset. `status` entries must be 0 or 1; `x` is `n * p` and
 * `z` is `n * q`, both row-major.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths; `out` must be writable.
 */
enum RgkmStatus rgkm_dataset_new(const double *time,
                                 const int32_t *status,
                                 size_t n,
                                 const double *x,
                                 size_t p,
                                 const double *z,
                                 size_t q,
                                 struct RgkmDataset **out);

/**
 * # Safety
 * `ds` must come from this library and not be used afterwards.
 */
void rgkm_dataset_free(struct RgkmDataset *ds);

/**
 * Dimensions of a dataset; any output pointer may be null.
 *
 * # Safety
 * `ds` must be a live handle.
 */
enum RgkmStatus rgkm_dataset_dims(const struct RgkmDataset *ds, size_t *n, size_t *p, size_t *q);

/**
 * Standardizes every covariate column in place (sample SD).
 *
 * # Safety
 * `ds` must be a live handle.
 */
enum RgkmStatus rgkm_dataset_standardize(struct RgkmDataset *ds);

/**
 * Simulated raw dataset for setting 1 to 7; `censor_rate` is a fraction.
 *
 * # Safety
 * `out` must be writable.
 */
enum RgkmStatus rgkm_simulate(uint8_t setting,
                              double censor_rate,
                              uint64_t seed,
                              struct RgkmDataset **out);

/**
 * Fits the Gaussian garrote model on a standardized dataset.
 * `max_cycles == 0` selects the default budget.
 *
 * # Safety
 * `ds` must be a live handle and `out` writable.
 */
enum RgkmStatus rgkm_fit(const struct RgkmDataset *ds,
                         double lambda1,
                         double lambda2,
                         double lambda3,
                         uint32_t max_cycles,
                         struct RgkmModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void rgkm_model_free(struct RgkmModel *model);

/**
 * Risk scores for `rows` subjects with raw covariates; `x` is `rows * P`,
 * `z` is `rows * Q`, `out` receives `rows` values.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths.
 */
enum RgkmStatus rgkm_predict(const struct RgkmModel *model,
                             const double *x,
                             const double *z,
                             size_t rows,
                             double *out);

/**
 * Model as a JSON string; release it with [`rgkm_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum RgkmStatus rgkm_model_to_json(const struct RgkmModel *model, char **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum RgkmStatus rgkm_model_from_json(const char *json, struct RgkmModel **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void rgkm_string_free(char *s);

/**
 * Uno's C-statistic. A non-positive or NaN `horizon` selects the default
 * (70th percentile of the times).
 *
 * # Safety
 * Arrays must hold `n` elements and `out` must be writable.
 */
enum RgkmStatus rgkm_c_statistic(const double *time,
                                 const int32_t *status,
                                 const double *risk,
                                 size_t n,
                                 double horizon,
                                 double *out);

/**
 * Integrated incident/dynamic AUC. A non-positive or NaN `horizon`
 * selects the default (90% of the largest time).
 *
 * # Safety
 * Arrays must hold `n` elements and `out` must be writable.
 */
enum RgkmStatus rgkm_auc(const double *time,
                         const int32_t *status,
                         const double *risk,
                         size_t n,
                         double horizon,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGGKM_H */
