#ifndef INCELL_H
#define INCELL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum IncellStatus {
  INCELL_STATUS_OK = 0,
  INCELL_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument, configuration or broken contract.
   */
  INCELL_STATUS_INVALID = 2,
  /**
   * Buffer or tensor dimensions disagree.
   */
  INCELL_STATUS_SHAPE = 3,
  /**
   * Malformed checkpoint or dataset file.
   */
  INCELL_STATUS_FORMAT = 4,
  /**
   * NaN or infinity in a computation, or training diverged.
   */
  INCELL_STATUS_NON_FINITE = 5,
  INCELL_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary. Indicates a bug.
   */
  INCELL_STATUS_INTERNAL = 7,
} IncellStatus;

/**
 * Labelled set of `steps x features` series.
 */
typedef struct IncellDataset IncellDataset;

/**
 * Trained (or loaded) classifier.
 */
typedef struct IncellModel IncellModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or NULL if
 * none. The string stays valid until the next failing call on the same
 * thread.
 */
const char *incell_last_error(void);

/**
 * Generates the training and test splits of a synthetic box dataset.
 * `kind` is a name such as `"earlier"`, `"three-latter"` or `"moving-40"`.
 * Zero for `steps`, `features`, `train` or `test` keeps the default
 * (100, 100, 1000, 300).
 *
 * # Safety
 * `kind` must be a NUL-terminated string; the out pointers must be valid.
 */
enum IncellStatus incell_dataset_generate(const char *kind,
                                          size_t steps,
                                          size_t features,
                                          size_t train,
                                          size_t test,
                                          uint64_t seed,
                                          struct IncellDataset **out_train,
                                          struct IncellDataset **out_test);

/**
 * Reads a dataset file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out_dataset` valid.
 */
enum IncellStatus incell_dataset_load(const char *path, struct IncellDataset **out_dataset);

/**
 * Writes a dataset file.
 *
 * # Safety
 * `dataset` must come from this library; `path` must be NUL-terminated.
 */
enum IncellStatus incell_dataset_save(const struct IncellDataset *dataset, const char *path);

/**
 * Releases a dataset. NULL is ignored.
 *
 * # Safety
 * `dataset` must come from this library and not be used afterwards.
 */
void incell_dataset_free(struct IncellDataset *dataset);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or come from this library.
 */
size_t incell_dataset_len(const struct IncellDataset *dataset);

/**
 * Sequence length, feature count and class count of a dataset.
 *
 * # Safety
 * `dataset` must come from this library; out pointers must be valid.
 */
enum IncellStatus incell_dataset_dims(const struct IncellDataset *dataset,
                                      size_t *steps,
                                      size_t *features,
                                      size_t *classes);

/**
 * Copies sample `index` into `values` (`len` must equal steps * features)
 * and its class into `label`. `mask` may be NULL; otherwise it receives the
 * ground-truth importance mask, or all zeros if the dataset has none.
 *
 * # Safety
 * `dataset` must come from this library; buffers must hold `len` doubles.
 */
enum IncellStatus incell_dataset_sample(const struct IncellDataset *dataset,
                                        size_t index,
                                        double *values,
                                        double *mask,
                                        size_t len,
                                        size_t *label);

/**
 * Trains a classifier on `train`, selecting the epoch with the best accuracy
 * on `test`. `arch` is a name such as `"lstm"` or `"lstm-incell"`. Zero for
 * `hidden`, `max_epochs` or a non-positive `learning_rate` keeps the
 * defaults (64, 200, 0.001).
 *
 * # Safety
 * Handles must come from this library; pointers must be valid.
 */
enum IncellStatus incell_train(const char *arch,
                               const struct IncellDataset *train,
                               const struct IncellDataset *test,
                               size_t hidden,
                               size_t max_epochs,
                               double learning_rate,
                               uint64_t seed,
                               struct IncellModel **out_model,
                               double *out_test_accuracy);

/**
 * Reads a checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated and `out_model` valid.
 */
enum IncellStatus incell_model_load(const char *path, struct IncellModel **out_model);

/**
 * Writes a checkpoint.
 *
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum IncellStatus incell_model_save(const struct IncellModel *model, const char *path);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void incell_model_free(struct IncellModel *model);

/**
 * Input length, feature count and class count the model expects.
 *
 * # Safety
 * `model` must come from this library; out pointers must be valid.
 */
enum IncellStatus incell_model_dims(const struct IncellModel *model,
                                    size_t *steps,
                                    size_t *features,
                                    size_t *classes);

/**
 * Class scores (pre-softmax) for one series of `len` = steps * features
 * values, written to `scores` of length `n_scores` = classes.
 *
 * # Safety
 * `model` must come from this library; buffers must hold the stated lengths.
 */
enum IncellStatus incell_model_scores(const struct IncellModel *model,
                                      const double *values,
                                      size_t len,
                                      double *scores,
                                      size_t n_scores);

/**
 * Absolute gradient of the score of `class` with respect to each input cell
 * of one series. `values` and `saliency` both hold `len` = steps * features
 * doubles.
 *
 * # Safety
 * `model` must come from this library; buffers must hold `len` doubles.
 */
enum IncellStatus incell_model_saliency(const struct IncellModel *model,
                                        const double *values,
                                        size_t len,
                                        size_t class_,
                                        double *saliency);

/**
 * Fraction of correctly classified samples of `dataset`.
 *
 * # Safety
 * Handles must come from this library; `accuracy` must be valid.
 */
enum IncellStatus incell_model_accuracy(const struct IncellModel *model,
                                        const struct IncellDataset *dataset,
                                        double *accuracy);

/**
 * Weighted Jaccard similarity of two nonnegative arrays of `len` values.
 *
 * # Safety
 * `a` and `b` must hold `len` doubles; `result` must be valid.
 */
enum IncellStatus incell_weighted_jaccard(const double *a,
                                          const double *b,
                                          size_t len,
                                          double *result);

/**
 * Mask-normalised L1 distance between a reference mask and a saliency map,
 * both of `len` values.
 *
 * # Safety
 * `reference` and `saliency` must hold `len` doubles; `result` must be valid.
 */
enum IncellStatus incell_euclidean_distance(const double *reference,
                                            const double *saliency,
                                            size_t len,
                                            double *result);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* INCELL_H */
