#ifndef NOUGAT_H
#define NOUGAT_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NougatKind {
  NOUGAT_KIND_NOUGAT = 0,
  NOUGAT_KIND_DRULSIF = 1,
  NOUGAT_KIND_MA = 2,
  NOUGAT_KIND_GMA = 3,
  NOUGAT_KIND_KNN = 4,
} NougatKind;

/**
 * Status codes returned by every fallible function.
 */
typedef enum NougatStatus {
  NOUGAT_STATUS_OK = 0,
  NOUGAT_STATUS_NULL_POINTER = 1,
  NOUGAT_STATUS_INVALID_ARGUMENT = 2,
  NOUGAT_STATUS_DIMENSION_MISMATCH = 3,
  NOUGAT_STATUS_DATA_ERROR = 4,
  NOUGAT_STATUS_NUMERICAL_ERROR = 5,
  NOUGAT_STATUS_PANIC = 6,
} NougatStatus;

/**
 * Opaque detector handle.
 */
typedef struct NougatDetector NougatDetector;

/**
 * Detector parameters. Start from [`nougat_config_default`].
 */
typedef struct NougatConfig {
  enum NougatKind kind;
  size_t n_ref;
  size_t n_test;
  /**
   * Gaussian kernel bandwidth.
   */
  double sigma;
  double mu;
  double nu;
  /**
   * Alarm threshold on the detector score.
   */
  double xi;
  /**
   * Coherence threshold for online dictionary growth.
   */
  double eta0;
  /**
   * Maximum dictionary size; 0 means unbounded.
   */
  size_t max_dict;
  /**
   * Non-zero selects the `|g|` alarm rule instead of `|g + 1|`.
   */
  int32_t abs_rule;
  size_t knn_k;
  double gma_alpha;
} NougatConfig;

/**
 * Result of one call to [`nougat_detector_step`].
 *
 * `value` and `score` are NaN until the windows are full.
 */
typedef struct NougatStep {
  /**
   * 0-based index of the sample just processed.
   */
  uint64_t t;
  bool warm;
  bool alarm;
  size_t dict_len;
  double value;
  double score;
} NougatStep;

/**
 * Default parameters: NOUGAT, N_ref = N_test = 64, σ = 1, μ = 0.047,
 * ν = 0.01, ξ = 1, η0 = 0.7.
 */
struct NougatConfig nougat_config_default(void);

/**
 * Creates a detector whose dictionary grows online from the stream.
 *
 * # Safety
 * `cfg` must point to a valid `NougatConfig`; `out` must be writable.
 */
enum NougatStatus nougat_detector_new(const struct NougatConfig *cfg, struct NougatDetector **out);

/**
 * Creates a detector with a fixed dictionary of `n_atoms` atoms of
 * dimension `dim`, stored row-major in `atoms`.
 *
 * # Safety
 * `atoms` must point to `n_atoms * dim` doubles; `cfg` and `out` as for
 * [`nougat_detector_new`].
 */
enum NougatStatus nougat_detector_new_fixed(const struct NougatConfig *cfg,
                                            const double *atoms,
                                            size_t n_atoms,
                                            size_t dim,
                                            struct NougatDetector **out);

/**
 * Feeds one sample of length `dim`.
 *
 * # Safety
 * `det` must come from a constructor above and not be freed; `y` must point
 * to `dim` doubles; `out` must be writable.
 */
enum NougatStatus nougat_detector_step(struct NougatDetector *det,
                                       const double *y,
                                       size_t dim,
                                       struct NougatStep *out);

/**
 * Current dictionary size, or 0 for a null handle or an empty dictionary.
 *
 * # Safety
 * `det` must be null or a live handle.
 */
size_t nougat_detector_dict_len(const struct NougatDetector *det);

/**
 * Releases a detector. Null is ignored.
 *
 * # Safety
 * `det` must be null or a live handle not used afterwards.
 */
void nougat_detector_free(struct NougatDetector *det);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *nougat_last_error(void);

/**
 * Gaussian kernel between two vectors of length `dim`.
 *
 * # Safety
 * `a` and `b` must point to `dim` doubles; `out` must be writable.
 */
enum NougatStatus nougat_kappa(const double *a,
                               const double *b,
                               size_t dim,
                               double sigma,
                               double *out);

#endif  /* NOUGAT_H */
