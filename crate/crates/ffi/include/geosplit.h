/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GEOSPLIT_H
#define GEOSPLIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Sample file format for [`gs_dataset_load`].
 */
#define GS_FORMAT_AUTO 0

#define GS_FORMAT_JSONL 1

#define GS_FORMAT_CSV 2

typedef enum {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_IO = 2,
  GS_STATUS_PARSE = 3,
  GS_STATUS_INVALID_ARGUMENT = 4,
  GS_STATUS_DOMAIN = 5,
  GS_STATUS_PANIC = 6,
} GsStatus;

typedef struct GsDataset GsDataset;

typedef struct GsFrames GsFrames;

typedef struct GsSplit GsSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call
 * into this library from the same thread.
 */
const char *gs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Load pose samples. `format` is one of the `GS_FORMAT_*` constants.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
GsStatus gs_dataset_load(const char *path, int32_t format, GsDataset **out);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a handle from [`gs_dataset_load`].
 */
size_t gs_dataset_len(const GsDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle from [`gs_dataset_load`] not yet freed.
 */
void gs_dataset_free(GsDataset *ds);

/**
 * Load a `sample_id,set` split file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
GsStatus gs_split_load(const char *path, GsSplit **out);

/**
 * # Safety
 * `split` must be null or a handle from [`gs_split_load`] not yet freed.
 */
void gs_split_free(GsSplit *split);

/**
 * Share of val and test samples strictly closer than `threshold` meters
 * to a train sample. NaN when a set has nothing to evaluate.
 *
 * # Safety
 * Handles must be live; `val_ratio` and `test_ratio` must be valid pointers.
 */
GsStatus gs_audit(const GsDataset *ds,
                  const GsSplit *split,
                  double threshold,
                  double *val_ratio,
                  double *test_ratio);

/**
 * Symmetric Chamfer distance between two polylines given as interleaved
 * `x0, y0, x1, y1, ...` arrays of `na` and `nb` points.
 *
 * # Safety
 * `a` and `b` must point to `2 * na` and `2 * nb` doubles; `out` must be valid.
 */
GsStatus gs_chamfer(const double *a,
                    size_t na,
                    const double *b,
                    size_t nb,
                    double resample_interval,
                    double *out);

/**
 * Intersection over union of two equally sized byte masks (non-zero is set).
 *
 * # Safety
 * `pred` and `gt` must point to `len` bytes; `out` must be valid.
 */
GsStatus gs_iou(const uint8_t *pred, const uint8_t *gt, size_t len, double *out);

/**
 * Load map elements (JSON lines). Predictions need `require_confidence`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
GsStatus gs_frames_load(const char *path, bool require_confidence, GsFrames **out);

/**
 * # Safety
 * `frames` must be null or a handle from [`gs_frames_load`] not yet freed.
 */
void gs_frames_free(GsFrames *frames);

/**
 * Chamfer mAP. Writes the overall mean to `overall` and, when `class_map`
 * is non-null, the divider, boundary and crossing mAPs to `class_map[0..3]`.
 *
 * # Safety
 * Handles must be live; `thresholds` must point to `n_thresholds` doubles;
 * `overall` must be valid; `class_map` null or room for 3 doubles.
 */
GsStatus gs_evaluate(const GsFrames *preds,
                     const GsFrames *gts,
                     const double *thresholds,
                     size_t n_thresholds,
                     double resample_interval,
                     double *overall,
                     double *class_map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOSPLIT_H */
