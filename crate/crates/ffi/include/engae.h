#ifndef ENGAE_H
#define ENGAE_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible function.
 */
typedef enum EngaeStatus {
  ENGAE_STATUS_OK = 0,
  ENGAE_STATUS_NULL_POINTER = 1,
  ENGAE_STATUS_INVALID_ARGUMENT = 2,
  ENGAE_STATUS_IO = 3,
  ENGAE_STATUS_FORMAT = 4,
  ENGAE_STATUS_INPUT = 5,
  ENGAE_STATUS_CONFIG = 6,
  ENGAE_STATUS_PROTOCOL = 7,
  ENGAE_STATUS_USAGE = 8,
  ENGAE_STATUS_PANIC = 9,
} EngaeStatus;

/**
 * A trained model, optionally with the normalization statistics it was
 * trained with.
 */
typedef struct EngaeModel EngaeModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a checkpoint file. The handle scores inputs as given, without
 * normalization.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EngaeStatus engae_model_load(const char *path, struct EngaeModel **out);

/**
 * Loads a checkpoint from memory.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` be a valid pointer.
 */
enum EngaeStatus engae_model_load_bytes(const uint8_t *data, size_t len, struct EngaeModel **out);

/**
 * Loads `model.ckpt` and `stats.json` from a directory written by
 * `engae train`. Scoring then normalizes raw features first.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EngaeStatus engae_model_load_dir(const char *dir, struct EngaeModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void engae_model_free(struct EngaeModel *model);

/**
 * Expected input shape: `steps` rows of `channels` features.
 *
 * # Safety
 * All pointers must be valid; `model` must be a live handle.
 */
enum EngaeStatus engae_model_input_shape(const struct EngaeModel *model,
                                         size_t *steps,
                                         size_t *channels);

/**
 * Writes 1 for autoencoders and 0 for classifiers.
 *
 * # Safety
 * All pointers must be valid; `model` must be a live handle.
 */
enum EngaeStatus engae_model_is_autoencoder(const struct EngaeModel *model, int32_t *out);

/**
 * Disengagement score of one row-major `steps × channels` sequence:
 * reconstruction error for autoencoders, probability for classifiers.
 *
 * # Safety
 * `data` must point to `steps * channels` doubles; other pointers valid.
 */
enum EngaeStatus engae_model_score(const struct EngaeModel *model,
                                   const double *data,
                                   size_t steps,
                                   size_t channels,
                                   double *out);

/**
 * ROC AUC of `len` scores; `labels[i] != 0` marks a disengaged sample.
 *
 * # Safety
 * `scores` and `labels` must each hold `len` elements; `out` valid.
 */
enum EngaeStatus engae_roc_auc(const double *scores,
                               const uint8_t *labels,
                               size_t len,
                               double *out);

/**
 * Average precision of `len` scores; `labels[i] != 0` marks a disengaged
 * sample.
 *
 * # Safety
 * `scores` and `labels` must each hold `len` elements; `out` valid.
 */
enum EngaeStatus engae_pr_auc(const double *scores, const uint8_t *labels, size_t len, double *out);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *engae_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *engae_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENGAE_H */
