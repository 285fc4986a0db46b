#ifndef REFDIFF_H
#define REFDIFF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define REFDIFF_DIRECTION_LEFT 1

#define REFDIFF_DIRECTION_RIGHT 2

#define REFDIFF_DIRECTION_TOP 4

#define REFDIFF_DIRECTION_BOTTOM 8

typedef enum RefdiffMode {
  REFDIFF_MODE_G = 0,
  REFDIFF_MODE_GS = 1,
  REFDIFF_MODE_DS = 2,
  REFDIFF_MODE_FULL = 3,
} RefdiffMode;

// Result codes. Values from 10 upward equal the CLI exit status of the
// same failure class.
typedef enum RefdiffStatus {
  REFDIFF_STATUS_OK = 0,
  REFDIFF_STATUS_NULL_ARGUMENT = 1,
  REFDIFF_STATUS_INVALID_UTF8 = 2,
  REFDIFF_STATUS_PANIC = 3,
  REFDIFF_STATUS_IO_FAILURE = 10,
  REFDIFF_STATUS_BAD_MAGIC = 11,
  REFDIFF_STATUS_UNSUPPORTED_VERSION = 12,
  REFDIFF_STATUS_UNSUPPORTED_DTYPE = 13,
  REFDIFF_STATUS_TRUNCATED_PAYLOAD = 14,
  REFDIFF_STATUS_DIM_OVERFLOW = 15,
  REFDIFF_STATUS_INVALID_JSON = 16,
  REFDIFF_STATUS_INVALID_TENSOR = 17,
  REFDIFF_STATUS_MISSING_FIELD = 20,
  REFDIFF_STATUS_DIM_MISMATCH = 21,
  REFDIFF_STATUS_ROOT_INDEX_OUT_OF_RANGE = 22,
  REFDIFF_STATUS_NON_BINARY_MASK = 23,
  REFDIFF_STATUS_EMPTY_EXPRESSION = 30,
  REFDIFF_STATUS_INDEX_OUT_OF_RANGE = 31,
  REFDIFF_STATUS_NO_VALID_PROPOSAL = 40,
  REFDIFF_STATUS_DEGENERATE_MASK = 41,
  REFDIFF_STATUS_ZERO_VECTOR = 42,
  REFDIFF_STATUS_LENGTH_MISMATCH = 43,
  REFDIFF_STATUS_EMPTY_PROPOSAL_SET = 44,
  REFDIFF_STATUS_MISSING_INPUT = 50,
  REFDIFF_STATUS_EMPTY_DATASET = 51,
  REFDIFF_STATUS_INVALID_CONFIG = 52,
} RefdiffStatus;

typedef enum RefdiffDtype {
  REFDIFF_DTYPE_F32 = 0,
  REFDIFF_DTYPE_U8 = 1,
} RefdiffDtype;

typedef enum RefdiffBiasProfile {
  REFDIFF_BIAS_PROFILE_LINEAR = 0,
  REFDIFF_BIAS_PROFILE_COSINE = 1,
} RefdiffBiasProfile;

// A real-valued `width × height` map (correlation map, positional bias).
typedef struct RefdiffMap RefdiffMap;

// Evaluation report over a dataset.
typedef struct RefdiffReport RefdiffReport;

// Result of segmenting one sample.
typedef struct RefdiffSelection RefdiffSelection;

// An RDTF tensor.
typedef struct RefdiffTensor RefdiffTensor;

// Scoring configuration. Obtain defaults from [`refdiff_config_default`].
typedef struct RefdiffConfig {
  enum RefdiffMode mode;
  double alpha;
  double beta;
  double epsilon;
  // Non-zero: thresholds are pixel-value quantiles.
  uint8_t percentile;
  // Non-zero: discriminative score is the raw dot product.
  uint8_t raw_dot;
} RefdiffConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *refdiff_last_error(void);

// Release a handle. Null is ignored.
//
// # Safety
// `handle` must be null or a live handle from this library.
void refdiff_tensor_free(struct RefdiffTensor *handle);

// Release a handle. Null is ignored.
//
// # Safety
// `handle` must be null or a live handle from this library.
void refdiff_map_free(struct RefdiffMap *handle);

// Release a handle. Null is ignored.
//
// # Safety
// `handle` must be null or a live handle from this library.
void refdiff_selection_free(struct RefdiffSelection *handle);

// Release a handle. Null is ignored.
//
// # Safety
// `handle` must be null or a live handle from this library.
void refdiff_report_free(struct RefdiffReport *handle);

// Default configuration for `mode`.
struct RefdiffConfig refdiff_config_default(enum RefdiffMode mode);

// Load an RDTF file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum RefdiffStatus refdiff_tensor_load(const char *path, struct RefdiffTensor **out);

// Write a tensor as RDTF.
//
// # Safety
// `tensor` must be a live handle; `path` a nul-terminated string.
enum RefdiffStatus refdiff_tensor_save(const struct RefdiffTensor *tensor, const char *path);

// Build an f32 tensor from `dims` (row-major, first axis slowest) and a copy
// of `data`.
//
// # Safety
// `dims` must point to `ndim` values and `data` to their product.
enum RefdiffStatus refdiff_tensor_from_f32(const size_t *dims,
                                           size_t ndim,
                                           const float *data,
                                           size_t len,
                                           struct RefdiffTensor **out);

// # Safety
// `tensor` must be null or a live handle.
size_t refdiff_tensor_ndim(const struct RefdiffTensor *tensor);

// Copy up to `cap` dimension sizes into `dims`; returns the tensor's ndim.
//
// # Safety
// `tensor` must be a live handle; `dims` must have room for `cap` values.
size_t refdiff_tensor_dims(const struct RefdiffTensor *tensor, size_t *dims, size_t cap);

// # Safety
// `tensor` must be a live handle.
enum RefdiffDtype refdiff_tensor_dtype(const struct RefdiffTensor *tensor);

// Borrow the f32 payload; null for u8 tensors. Valid while the handle lives.
//
// # Safety
// `tensor` must be a live handle; `len` may be null.
const float *refdiff_tensor_data_f32(const struct RefdiffTensor *tensor, size_t *len);

// Borrow the u8 payload; null for f32 tensors. Valid while the handle lives.
//
// # Safety
// `tensor` must be a live handle; `len` may be null.
const uint8_t *refdiff_tensor_data_u8(const struct RefdiffTensor *tensor, size_t *len);

// Correlation map of token `k` from a `w × h × l × N` attention tensor,
// resized to `width × height`.
//
// # Safety
// `attention` must be a live handle; `out` must be writable.
enum RefdiffStatus refdiff_correlation_matrix(const struct RefdiffTensor *attention,
                                              size_t k,
                                              size_t width,
                                              size_t height,
                                              double epsilon,
                                              struct RefdiffMap **out);

// Positional bias for a bitwise OR of `REFDIFF_DIRECTION_*` flags.
// Conflicting flags on one axis cancel.
//
// # Safety
// `out` must be writable.
enum RefdiffStatus refdiff_positional_bias(uint32_t directions,
                                           size_t width,
                                           size_t height,
                                           enum RefdiffBiasProfile profile,
                                           struct RefdiffMap **out);

// # Safety
// `map` must be null or a live handle.
size_t refdiff_map_width(const struct RefdiffMap *map);

// # Safety
// `map` must be null or a live handle.
size_t refdiff_map_height(const struct RefdiffMap *map);

// Borrow the `width·height` values, indexed `x·height + y`.
//
// # Safety
// `map` must be a live handle; `len` may be null.
const double *refdiff_map_data(const struct RefdiffMap *map, size_t *len);

// Mean of `map` inside the mask minus the mean outside it. `mask` holds
// `len` bytes laid out like the map.
//
// # Safety
// `map` must be a live handle, `mask` must point to `len` bytes and `out`
// must be writable.
enum RefdiffStatus refdiff_generative_score(const struct RefdiffMap *map,
                                            const uint8_t *mask,
                                            size_t len,
                                            double *out);

// IoU of two `width × height` masks.
//
// # Safety
// `pred` and `gt` must each point to `width·height` bytes; `out` must be
// writable.
enum RefdiffStatus refdiff_iou(const uint8_t *pred,
                               const uint8_t *gt,
                               size_t width,
                               size_t height,
                               double *out);

// Segment the sample described by a manifest file.
//
// # Safety
// `manifest_path` must be a nul-terminated string, `config` a valid
// pointer and `out` writable.
enum RefdiffStatus refdiff_segment(const char *manifest_path,
                                   const struct RefdiffConfig *config,
                                   struct RefdiffSelection **out);

// Index of the selected proposal in the input stack (or threshold list for
// weight-free proposals).
//
// # Safety
// `sel` must be a live handle.
size_t refdiff_selection_index(const struct RefdiffSelection *sel);

// # Safety
// `sel` must be a live handle.
double refdiff_selection_score(const struct RefdiffSelection *sel);

// Borrow the selected mask, indexed `x·height + y`.
//
// # Safety
// `sel` must be a live handle; `width` and `height` may be null.
const uint8_t *refdiff_selection_mask(const struct RefdiffSelection *sel,
                                      size_t *width,
                                      size_t *height);

// Evaluate a dataset (directory or `dataset.json`) with up to `jobs` worker
// threads.
//
// # Safety
// `dataset_path` must be a nul-terminated string, `config` a valid pointer
// and `out` writable.
enum RefdiffStatus refdiff_evaluate(const char *dataset_path,
                                    const struct RefdiffConfig *config,
                                    size_t jobs,
                                    struct RefdiffReport **out);

// # Safety
// `report` must be a live handle.
double refdiff_report_miou(const struct RefdiffReport *report);

// # Safety
// `report` must be a live handle.
double refdiff_report_oiou(const struct RefdiffReport *report);

// # Safety
// `report` must be a live handle.
size_t refdiff_report_len(const struct RefdiffReport *report);

// Per-sample IoU, NaN when `i` is out of range.
//
// # Safety
// `report` must be a live handle.
double refdiff_report_sample_iou(const struct RefdiffReport *report, size_t i);

// Write the report as JSON, byte-identical to the CLI's `--report` output.
//
// # Safety
// `report` must be a live handle; `path` a nul-terminated string.
enum RefdiffStatus refdiff_report_write(const struct RefdiffReport *report, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFDIFF_H */
