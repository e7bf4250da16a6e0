#ifndef SSRA_H
#define SSRA_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsraStatus {
  SSRA_STATUS_OK = 0,
  SSRA_STATUS_NULL_POINTER = 1,
  SSRA_STATUS_INVALID_UTF8 = 2,
  SSRA_STATUS_INVALID_ARGUMENT = 3,
  SSRA_STATUS_IO = 4,
  SSRA_STATUS_INVALID_DATA = 5,
  SSRA_STATUS_INSUFFICIENT = 6,
  SSRA_STATUS_METRIC = 7,
  SSRA_STATUS_LOSS = 8,
  SSRA_STATUS_PANIC = 99,
} SsraStatus;

/**
 * Which records a corpus file may contain.
 */
typedef enum SsraSchema {
  SSRA_SCHEMA_LABELED = 0,
  SSRA_SCHEMA_UNLABELED = 1,
  SSRA_SCHEMA_MIXED = 2,
} SsraSchema;

typedef enum SsraGain {
  SSRA_GAIN_LINEAR = 0,
  SSRA_GAIN_EXPONENTIAL = 1,
} SsraGain;

/**
 * Opaque corpus handle.
 */
typedef struct SsraCorpus SsraCorpus;

/**
 * Size and label distribution of a corpus. Proportions are percentages over
 * labeled records, NaN when no record is labeled.
 */
typedef struct SsraCorpusStats {
  size_t size;
  size_t label_counts[4];
  double label_proportions[4];
  size_t n_queries;
  size_t n_docs;
} SsraCorpusStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ssra_version(void);

/**
 * Message of the last failing call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ssra_last_error(void);

/**
 * Loads a JSONL corpus.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SsraStatus ssra_corpus_load(const char *path, enum SsraSchema schema, struct SsraCorpus **out);

/**
 * Releases a corpus handle. NULL is ignored.
 *
 * # Safety
 * `corpus` must be NULL or a handle returned by this library that has not
 * been freed.
 */
void ssra_corpus_free(struct SsraCorpus *corpus);

/**
 * Number of records; 0 for NULL.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t ssra_corpus_len(const struct SsraCorpus *corpus);

/**
 * Writes the corpus as JSONL.
 *
 * # Safety
 * `corpus` must be a live handle and `path` a NUL-terminated string.
 */
enum SsraStatus ssra_corpus_save(const struct SsraCorpus *corpus, const char *path);

/**
 * # Safety
 * `corpus` must be a live handle and `out` a writable pointer.
 */
enum SsraStatus ssra_corpus_stats(const struct SsraCorpus *corpus, struct SsraCorpusStats *out);

/**
 * New handle with the first record per (normalized query, label).
 *
 * # Safety
 * `corpus` must be a live handle and `out` a writable pointer.
 */
enum SsraStatus ssra_corpus_dedup(const struct SsraCorpus *corpus, struct SsraCorpus **out);

/**
 * New handle holding only label-0 and label-3 records.
 *
 * # Safety
 * `corpus` must be a live handle and `out` a writable pointer.
 */
enum SsraStatus ssra_corpus_binary_subset(const struct SsraCorpus *corpus, struct SsraCorpus **out);

/**
 * New handle with exactly `n_per_label` records of each label, sampled
 * with `seed`. Fails with `SSRA_STATUS_INSUFFICIENT` on a short pool.
 *
 * # Safety
 * `corpus` must be a live handle and `out` a writable pointer.
 */
enum SsraStatus ssra_corpus_balanced_subset(const struct SsraCorpus *corpus,
                                            size_t n_per_label,
                                            uint64_t seed,
                                            struct SsraCorpus **out);

/**
 * Mean nDCG@k of a TSV run against TSV qrels, unjudged documents as 0 and
 * all-zero queries counted as 0.
 *
 * # Safety
 * `qrels_path` and `run_path` must be NUL-terminated strings and `out_mean`
 * a writable pointer.
 */
enum SsraStatus ssra_ndcg_files(const char *qrels_path,
                                const char *run_path,
                                size_t k,
                                enum SsraGain gain,
                                double *out_mean);

/**
 * Average precision with positives defined as `label >= threshold`.
 *
 * # Safety
 * `scores` and `labels` must point to `n` elements and `out_ap` must be
 * writable.
 */
enum SsraStatus ssra_average_precision(const double *scores,
                                       const uint8_t *labels,
                                       size_t n,
                                       uint8_t threshold,
                                       double *out_ap);

/**
 * Exact-match duplicate rate over normalized query strings.
 *
 * # Safety
 * `queries` must point to `n` NUL-terminated strings; the out pointers must
 * be writable.
 */
enum SsraStatus ssra_duplicate_rate(const char *const *queries,
                                    size_t n,
                                    double *out_rate,
                                    size_t *out_unique);

/**
 * Overall fraction of `targets[i] == judged[i]`; 0 for `n == 0`.
 *
 * # Safety
 * `targets` and `judged` must point to `n` elements and `out_rate` must be
 * writable.
 */
enum SsraStatus ssra_consistency_rate(const uint8_t *targets,
                                      const uint8_t *judged,
                                      size_t n,
                                      double *out_rate);

/**
 * Label-weighted InfoNCE (cosine similarity, w(s) = s/3) over row-major
 * `n x dim` matrices. Gradient outputs may be NULL; otherwise they must hold
 * `n * dim` doubles.
 *
 * # Safety
 * Input pointers must reference `n * dim` (vectors) or `n` (labels)
 * elements; non-NULL outputs must be writable for the sizes above.
 */
enum SsraStatus ssra_weighted_infonce(const double *queries,
                                      const double *documents,
                                      const uint8_t *labels,
                                      size_t n,
                                      size_t dim,
                                      double temperature,
                                      double *out_loss,
                                      double *grad_queries,
                                      double *grad_documents);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSRA_H */
