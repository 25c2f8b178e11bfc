#ifndef SQUAD_MT_H
#define SQUAD_MT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SqmtStatus {
  SQMT_STATUS_OK = 0,
  SQMT_STATUS_NULL_ARGUMENT = 1,
  SQMT_STATUS_INVALID_UTF8 = 2,
  SQMT_STATUS_INVALID_DATASET = 3,
  SQMT_STATUS_INVALID_CONFIG = 4,
  SQMT_STATUS_BACKEND = 5,
  SQMT_STATUS_PIPELINE = 6,
  SQMT_STATUS_IO = 7,
  SQMT_STATUS_PANIC = 8,
} SqmtStatus;

/**
 * A parsed and validated dataset.
 */
typedef struct SqmtDataset SqmtDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *sqmt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sqmt_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void sqmt_string_free(char *s);

/**
 * Parses and validates SQuAD2.0 JSON.
 *
 * # Safety
 * `json` must point to `len` readable bytes; `out` must be writable.
 */
enum SqmtStatus sqmt_dataset_parse(const uint8_t *json, size_t len, struct SqmtDataset **out);

/**
 * # Safety
 * `d` must be NULL or a handle from this library, not yet freed.
 */
void sqmt_dataset_free(struct SqmtDataset *d);

/**
 * Serializes to JSON; `extended` keeps `answer_pieces`.
 *
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum SqmtStatus sqmt_dataset_to_json(const struct SqmtDataset *d, bool extended, char **out);

/**
 * Number of questions, answerable or not.
 *
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum SqmtStatus sqmt_dataset_question_count(const struct SqmtDataset *d, size_t *out);

/**
 * Summary statistics as a JSON object.
 *
 * # Safety
 * `d` must be a live handle; `out` must be writable.
 */
enum SqmtStatus sqmt_dataset_stats(const struct SqmtDataset *d, char **out);

/**
 * Translates a dataset. `config_json` holds `source_lang`, `target_lang`
 * and optionally `jobs`, `batch_size`, `strip` ("all" or "added"),
 * `cache_dir` and `backend` (same keys as the CLI config file's `[backend]`
 * table). On success `*out` receives a new handle and, when `report` is not
 * NULL, `*report` the transfer report as JSON.
 *
 * # Safety
 * `d` must be a live handle, `config_json` a NUL-terminated string, `out`
 * writable, and `report` NULL or writable.
 */
enum SqmtStatus sqmt_translate(const struct SqmtDataset *d,
                               const char *config_json,
                               struct SqmtDataset **out,
                               char **report);

/**
 * Scores `predictions_json` (an object of question id → answer) against
 * the dataset. `lang` picks the normalization profile ("en" removes English
 * articles); NULL means "en". The report is written to `*out` as JSON.
 *
 * # Safety
 * `d` must be a live handle, `predictions_json` a NUL-terminated string,
 * `lang` NULL or a NUL-terminated string, and `out` writable.
 */
enum SqmtStatus sqmt_score(const struct SqmtDataset *d,
                           const char *predictions_json,
                           const char *lang,
                           char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQUAD_MT_H */
