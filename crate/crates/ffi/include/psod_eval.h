#ifndef PSOD_EVAL_H
#define PSOD_EVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Default weight on the cross-entropy term of the mask loss.
 */
#define PSOD_DEFAULT_LAMBDA_CE 2.5

typedef enum PsodStatus {
  PSOD_STATUS_OK = 0,
  PSOD_STATUS_NULL_POINTER = 1,
  PSOD_STATUS_INVALID_ARGUMENT = 2,
  PSOD_STATUS_DIMENSION_MISMATCH = 3,
  PSOD_STATUS_EMPTY_GROUND_TRUTH = 4,
  PSOD_STATUS_IO = 5,
  PSOD_STATUS_PANIC = 6,
} PsodStatus;

typedef enum PsodTiePolicy {
  /**
   * Exact ties count as half correct.
   */
  PSOD_TIE_POLICY_HALF = 0,
  PSOD_TIE_POLICY_WRONG = 1,
} PsodTiePolicy;

/**
 * Opaque saliency map with values in `[0, 1]`.
 */
typedef struct PsodMask PsodMask;

typedef struct PsodMetrics {
  double f_max;
  double f_avg;
  double s_measure;
  double e_mean;
  double mae;
  double match_score;
} PsodMetrics;

typedef struct PsodLoss {
  double ce;
  double dice;
  double total;
} PsodLoss;

typedef struct PsodEvalSummary {
  double threshold;
  double ap;
  double ar;
  double f1;
  size_t n_images;
} PsodEvalSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *psod_version(void);

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *psod_last_error_message(void);

/**
 * Creates a mask from `len == width * height` row-major values in `[0, 1]`.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum PsodStatus psod_mask_new(size_t width,
                              size_t height,
                              const double *values,
                              size_t len,
                              struct PsodMask **out);

/**
 * Loads an 8-bit grayscale or color PNG.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum PsodStatus psod_mask_load(const char *path, struct PsodMask **out);

/**
 * Writes an 8-bit grayscale PNG.
 *
 * # Safety
 * `mask` must be a live handle; `path` must be a nul-terminated string.
 */
enum PsodStatus psod_mask_save(const struct PsodMask *mask, const char *path);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `mask` must come from this library and not be used afterwards.
 */
void psod_mask_free(struct PsodMask *mask);

/**
 * # Safety
 * `mask` must be NULL or a live handle. Returns 0 for NULL.
 */
size_t psod_mask_width(const struct PsodMask *mask);

/**
 * # Safety
 * `mask` must be NULL or a live handle. Returns 0 for NULL.
 */
size_t psod_mask_height(const struct PsodMask *mask);

/**
 * Copies the row-major values into `out`, which must hold `len` doubles.
 *
 * # Safety
 * `mask` must be a live handle; `out` must point to `len` writable doubles.
 */
enum PsodStatus psod_mask_values(const struct PsodMask *mask, double *out, size_t len);

/**
 * All classical metrics of `pred` against `gt` (binarized at 0.5).
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum PsodStatus psod_metrics(const struct PsodMask *pred,
                             const struct PsodMask *gt,
                             struct PsodMetrics *out);

/**
 * Mean of the average F-measure and the S-measure.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum PsodStatus psod_match_score(const struct PsodMask *pred,
                                 const struct PsodMask *gt,
                                 double *out);

/**
 * `total = lambda_ce * ce + dice`.
 *
 * # Safety
 * Both handles must be live; `out` must be writable.
 */
enum PsodStatus psod_mask_loss(const struct PsodMask *pred,
                               const struct PsodMask *gt,
                               double lambda_ce,
                               struct PsodLoss *out);

/**
 * Harmonic mean of AP and AR; 0 when both are 0.
 */
double psod_f1_harmonic(double ap, double ar);

/**
 * Maps a quality level in 1..=4 to {0, 0.33, 0.67, 1}.
 *
 * # Safety
 * `out` must be writable.
 */
enum PsodStatus psod_normalize_quality_level(uint8_t level, double *out);

/**
 * Image precision from a row-major `n_preds x n_gts` match-score matrix.
 *
 * # Safety
 * `scores` must point to `n_preds * n_gts` doubles; `out` must be writable.
 */
enum PsodStatus psod_image_precision(const double *scores,
                                     size_t n_preds,
                                     size_t n_gts,
                                     double *out);

/**
 * Image recall from a row-major `n_preds x n_gts` match-score matrix.
 *
 * # Safety
 * `scores` must point to `n_preds * n_gts` doubles; `out` must be writable.
 */
enum PsodStatus psod_image_recall(const double *scores, size_t n_preds, size_t n_gts, double *out);

/**
 * Evaluates a manifest at quality threshold `tau`.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum PsodStatus psod_evaluate_manifest(const char *path, double tau, struct PsodEvalSummary *out);

/**
 * Fraction of pairs where the labeled superior side scores higher.
 * `a_superior[i]` is nonzero when side A of pair `i` is the preferred one.
 *
 * # Safety
 * The three arrays must each hold `n` elements; `out` must be writable.
 */
enum PsodStatus psod_alignment_accuracy(const double *scores_a,
                                        const double *scores_b,
                                        const uint8_t *a_superior,
                                        size_t n,
                                        enum PsodTiePolicy tie_policy,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSOD_EVAL_H */
