#ifndef KSPACE_QA_H
#define KSPACE_QA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define KQA_OK 0

/**
 * A required pointer argument was null.
 */
#define KQA_ERR_NULL 1

/**
 * Invalid argument, shape mismatch or inconsistent parameters.
 */
#define KQA_ERR_INVALID 2

#define KQA_ERR_IO 3

/**
 * Malformed file or checkpoint.
 */
#define KQA_ERR_FORMAT 4

/**
 * Output buffer length does not match.
 */
#define KQA_ERR_BUFFER 5

/**
 * Internal panic caught at the boundary.
 */
#define KQA_ERR_PANIC 6

/**
 * Number of artifact classes; probability buffers hold this many values.
 */
#define KQA_NUM_CLASSES 5

/**
 * Real 2D image.
 */
typedef struct KqaGrid KqaGrid;

/**
 * Trained classifier loaded from a checkpoint.
 */
typedef struct KqaModel KqaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *kqa_last_error(void);

/**
 * Static, NUL-terminated name of a class id, or null when out of range.
 */
const char *kqa_class_name(uint8_t class_id);

/**
 * Copies `height * width` row-major values into a new grid.
 *
 * # Safety
 * `data` must point to `height * width` readable doubles; `out` must be writable.
 */
int32_t kqa_grid_new(size_t height, size_t width, const double *data, struct KqaGrid **out);

/**
 * # Safety
 * `grid` must be a live handle; `height` and `width` must be writable.
 */
int32_t kqa_grid_dims(const struct KqaGrid *grid, size_t *height, size_t *width);

/**
 * Copies the grid values (row-major) into `out`, which holds `len` doubles.
 *
 * # Safety
 * `grid` must be a live handle and `out` must hold `len` writable doubles.
 */
int32_t kqa_grid_read(const struct KqaGrid *grid, double *out, size_t len);

/**
 * # Safety
 * `grid` must be null or a handle not yet freed.
 */
void kqa_grid_free(struct KqaGrid *grid);

/**
 * Unnormalized forward 2D DFT into separate real and imaginary buffers.
 *
 * # Safety
 * `grid` must be a live handle; `re` and `im` must each hold `len` writable doubles.
 */
int32_t kqa_dft2(const struct KqaGrid *grid, double *re, double *im, size_t len);

/**
 * Corrupts `grid` with severity drawn from `seed` for the given class
 * (0 clean, 1 respiratory, 3 gibbs, 4 aliasing; cardiac needs a sequence
 * and is rejected).
 *
 * # Safety
 * `grid` must be a live handle and `out` writable.
 */
int32_t kqa_corrupt(const struct KqaGrid *grid,
                    uint8_t class_id,
                    uint64_t seed,
                    struct KqaGrid **out);

/**
 * Corrupts `grid` with explicit parameters given as JSON, for example
 * `{"kind":"aliasing","factor":2,"axis":"rows"}`.
 *
 * # Safety
 * `grid` must be a live handle, `params_json` a NUL-terminated string and `out` writable.
 */
int32_t kqa_corrupt_with_params(const struct KqaGrid *grid,
                                const char *params_json,
                                struct KqaGrid **out);

/**
 * Loads a checkpoint written by the `train` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
int32_t kqa_model_load(const char *path, struct KqaModel **out);

/**
 * Class probabilities of an image (resized and normalized as in training).
 *
 * # Safety
 * `model` and `grid` must be live handles; `probs` must hold `KQA_NUM_CLASSES` doubles.
 */
int32_t kqa_model_predict(const struct KqaModel *model, const struct KqaGrid *grid, double *probs);

/**
 * Class probabilities of raw k-space (frequency models only); `re` and
 * `im` hold `height * width` row-major values.
 *
 * # Safety
 * `model` must be a live handle, `re`/`im` readable for `height * width`
 * doubles and `probs` writable for `KQA_NUM_CLASSES` doubles.
 */
int32_t kqa_model_predict_kspace(const struct KqaModel *model,
                                 size_t height,
                                 size_t width,
                                 const double *re,
                                 const double *im,
                                 double *probs);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void kqa_model_free(struct KqaModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KSPACE_QA_H */
