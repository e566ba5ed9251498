#ifndef ADVQA_H
#define ADVQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ADVQA_PLACEMENT_APPEND 0

#define ADVQA_PLACEMENT_PREPEND 1

typedef enum {
  ADVQA_STATUS_OK = 0,
  ADVQA_STATUS_NULL_ARGUMENT = 1,
  ADVQA_STATUS_INVALID_UTF8 = 2,
  ADVQA_STATUS_INVALID_INPUT = 3,
  ADVQA_STATUS_IO = 4,
  ADVQA_STATUS_INVALID_ARGUMENT = 5,
  ADVQA_STATUS_PANIC = 6,
} advqa_status;

typedef struct AdvqaCorpus AdvqaCorpus;

typedef struct AdvqaPredictions AdvqaPredictions;

typedef struct AdvqaRecordStore AdvqaRecordStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next advqa call on the same thread.
 */
const char *advqa_last_error(void);

const char *advqa_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void advqa_string_free(char *s);

/**
 * # Safety
 * `answer` must be a valid C string; `out` must be writable.
 */
advqa_status advqa_normalize_answer(const char *answer, char **out);

/**
 * # Safety
 * `golds` must point to `gold_count` valid C strings.
 */
advqa_status advqa_exact_match(const char *prediction,
                               const char *const *golds,
                               size_t gold_count,
                               uint8_t *out);

/**
 * # Safety
 * `golds` must point to `gold_count` valid C strings.
 */
advqa_status advqa_token_f1(const char *prediction,
                            const char *const *golds,
                            size_t gold_count,
                            double *out);

/**
 * Parse and validate a SQuAD-format JSON document.
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
advqa_status advqa_corpus_from_json(const char *json, AdvqaCorpus **out);

/**
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
advqa_status advqa_corpus_load(const char *path, AdvqaCorpus **out);

/**
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
advqa_status advqa_corpus_question_count(const AdvqaCorpus *corpus, size_t *out);

/**
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
advqa_status advqa_corpus_to_json(const AdvqaCorpus *corpus, char **out);

/**
 * # Safety
 * `corpus` must be null or a handle not yet freed.
 */
void advqa_corpus_free(AdvqaCorpus *corpus);

/**
 * Rule-based distractor records for every question, using the built-in
 * swap table.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
advqa_status advqa_generate(const AdvqaCorpus *corpus, uint64_t seed, AdvqaRecordStore **out);

/**
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
advqa_status advqa_records_from_json(const char *json, AdvqaRecordStore **out);

/**
 * # Safety
 * `store` must be a live handle; `total` and `accepted` must be writable.
 */
advqa_status advqa_records_counts(const AdvqaRecordStore *store, size_t *total, size_t *accepted);

/**
 * # Safety
 * `store` must be a live handle; `out` must be writable.
 */
advqa_status advqa_records_to_json(const AdvqaRecordStore *store, char **out);

/**
 * # Safety
 * `store` must be null or a handle not yet freed.
 */
void advqa_records_free(AdvqaRecordStore *store);

/**
 * Build one evaluation dataset with `k` distractor sentences per question.
 * `placement` is `ADVQA_PLACEMENT_APPEND` or `ADVQA_PLACEMENT_PREPEND`.
 *
 * # Safety
 * `corpus` and `store` must be live handles; `out` must be writable.
 */
advqa_status advqa_augment(const AdvqaCorpus *corpus,
                           const AdvqaRecordStore *store,
                           size_t k,
                           uint32_t placement,
                           AdvqaCorpus **out);

/**
 * Run the lexical-overlap baseline reader over every question.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
advqa_status advqa_predict(const AdvqaCorpus *corpus, AdvqaPredictions **out);

/**
 * Parse a `{"question id": "answer"}` prediction file.
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
advqa_status advqa_predictions_from_json(const char *json, AdvqaPredictions **out);

/**
 * # Safety
 * `predictions` must be a live handle; `out` must be writable.
 */
advqa_status advqa_predictions_to_json(const AdvqaPredictions *predictions, char **out);

/**
 * # Safety
 * `predictions` must be null or a handle not yet freed.
 */
void advqa_predictions_free(AdvqaPredictions *predictions);

/**
 * Mean exact match and F1, both as percentages. Questions without a
 * prediction score zero.
 *
 * # Safety
 * Both handles must be live; `em` and `f1` must be writable.
 */
advqa_status advqa_evaluate(const AdvqaPredictions *predictions,
                            const AdvqaCorpus *dataset,
                            double *em,
                            double *f1);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADVQA_H */
