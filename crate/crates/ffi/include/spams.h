#ifndef SPAMS_H
#define SPAMS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SpamsStatus {
  SPAMS_STATUS_OK = 0,
  SPAMS_STATUS_NULL_POINTER = 1,
  SPAMS_STATUS_INVALID_ARGUMENT = 2,
  SPAMS_STATUS_IO = 3,
  SPAMS_STATUS_DATA = 4,
  SPAMS_STATUS_CONFIG = 5,
  SPAMS_STATUS_MODEL = 6,
  SPAMS_STATUS_TRAINING = 7,
  SPAMS_STATUS_BUFFER_TOO_SMALL = 8,
  SPAMS_STATUS_PANIC = 9,
} SpamsStatus;

/**
 * Opaque labeled dataset.
 */
typedef struct SpamsDataset SpamsDataset;

/**
 * Opaque trained model.
 */
typedef struct SpamsModel SpamsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *spams_last_error(void);

/**
 * Loads a dataset directory (`sequences.csv`, `labels.csv`, optional
 * `contexts.csv`).
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum SpamsStatus spams_dataset_load(const char *dir, struct SpamsDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from [`spams_dataset_load`] not yet freed.
 */
void spams_dataset_free(struct SpamsDataset *ds);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t spams_dataset_len(const struct SpamsDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t spams_dataset_num_classes(const struct SpamsDataset *ds);

/**
 * Trains a model. `config` is optional `key=value` text using the same keys
 * as the command-line config file; window and stride default to 5 and 1.
 *
 * # Safety
 * `train` and `val` must be live dataset handles, `config` null or a
 * NUL-terminated string, `out` a valid pointer.
 */
enum SpamsStatus spams_model_train(const struct SpamsDataset *train,
                                   const struct SpamsDataset *val,
                                   const char *config,
                                   struct SpamsModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SpamsStatus spams_model_load(const char *path, struct SpamsModel **out);

/**
 * # Safety
 * `model` must be a live model handle and `path` a NUL-terminated string.
 */
enum SpamsStatus spams_model_save(const struct SpamsModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void spams_model_free(struct SpamsModel *model);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t spams_model_num_classes(const struct SpamsModel *model);

/**
 * Number of features per time step the model expects.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t spams_model_input_dims(const struct SpamsModel *model);

/**
 * Classifies one sequence stored row-major (`steps` rows of `dims` values).
 * Writes `num_classes` posteriors; `t_star` (may be null) receives the
 * 1-based start window of each class's best block.
 *
 * # Safety
 * `values` must hold `steps * dims` doubles; `posterior` and a non-null
 * `t_star` must hold `num_classes` elements.
 */
enum SpamsStatus spams_predict(const struct SpamsModel *model,
                               const double *values,
                               size_t steps,
                               size_t dims,
                               double *posterior,
                               size_t *t_star,
                               size_t num_classes);

/**
 * Temporal profile of one sequence, window-major (`num_windows` rows of
 * `num_classes` probabilities). The required window count is always stored
 * in `num_windows`; if `capacity` is below `num_windows * num_classes`
 * nothing else is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `values` must hold `steps * dims` doubles, `out` `capacity` doubles (or be
 * null when `capacity` is 0), `num_windows` a valid pointer.
 */
enum SpamsStatus spams_profile(const struct SpamsModel *model,
                               const double *values,
                               size_t steps,
                               size_t dims,
                               double *out,
                               size_t capacity,
                               size_t *num_windows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPAMS_H */
