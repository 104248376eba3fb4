#ifndef SENTIPIPE_H
#define SENTIPIPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every call. Codes 2 to 5 match the command-line exit codes.
 */
typedef enum {
  SP_STATUS_OK = 0,
  /**
   * A required pointer was null or a length was zero.
   */
  SP_STATUS_NULL_ARGUMENT = 1,
  SP_STATUS_CONFIG = 2,
  SP_STATUS_FORMAT = 3,
  SP_STATUS_NUMERICAL = 4,
  SP_STATUS_TRANSPORT = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  SP_STATUS_INVALID_UTF8 = 6,
  /**
   * The caller's buffer length does not match the required size.
   */
  SP_STATUS_BUFFER_SIZE = 7,
  /**
   * A Rust panic was caught.
   */
  SP_STATUS_INTERNAL = 8,
} SpStatus;

/**
 * Embedded dataset loaded from an EMB1 or EMB1-jsonl file.
 */
typedef struct SpDataset SpDataset;

/**
 * Trained model loaded from its JSON file.
 */
typedef struct SpModel SpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *sp_last_error(void);

/**
 * Library version as a static string.
 */
const char *sp_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or came from this library and has not been freed.
 */
void sp_string_free(char *s);

/**
 * Loads an embedding file; `.jsonl` paths use the JSON twin.
 *
 * # Safety
 * `path` is a NUL-terminated string and `out` is a valid pointer.
 */
SpStatus sp_dataset_load(const char *path, SpDataset **out);

/**
 * # Safety
 * `ds` is null or a live handle from [`sp_dataset_load`].
 */
void sp_dataset_free(SpDataset *ds);

/**
 * Row count, or 0 for a null handle.
 *
 * # Safety
 * `ds` is null or a live handle.
 */
size_t sp_dataset_rows(const SpDataset *ds);

/**
 * Embedding width, or 0 for a null handle.
 *
 * # Safety
 * `ds` is null or a live handle.
 */
size_t sp_dataset_dim(const SpDataset *ds);

/**
 * Copies the row-major feature matrix into `out`, which holds exactly
 * `rows × dim` values.
 *
 * # Safety
 * `ds` is a live handle and `out` points to `len` writable doubles.
 */
SpStatus sp_dataset_features(const SpDataset *ds, double *out, size_t len);

/**
 * Copies the class codes into `out` (`rows` bytes). Fails with
 * `SP_STATUS_FORMAT` for an unlabeled dataset.
 *
 * # Safety
 * `ds` is a live handle and `out` points to `len` writable bytes.
 */
SpStatus sp_dataset_labels(const SpDataset *ds, uint8_t *out, size_t len);

/**
 * Loads a model JSON file written by `train` or `run`.
 *
 * # Safety
 * `path` is a NUL-terminated string and `out` is a valid pointer.
 */
SpStatus sp_model_load(const char *path, SpModel **out);

/**
 * # Safety
 * `model` is null or a live handle from [`sp_model_load`].
 */
void sp_model_free(SpModel *model);

/**
 * Input width the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
size_t sp_model_dim(const SpModel *model);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
size_t sp_model_n_classes(const SpModel *model);

/**
 * Predicts class codes for a row-major `rows × dim` matrix into `out`
 * (`rows` bytes).
 *
 * # Safety
 * `model` is a live handle, `features` points to `rows × dim` doubles and
 * `out` to `rows` writable bytes.
 */
SpStatus sp_model_predict(const SpModel *model,
                          const double *features,
                          size_t rows,
                          size_t dim,
                          uint8_t *out);

/**
 * Per-class scores, row-major `rows × n_classes`, into `out`, which holds
 * exactly `out_len` values.
 *
 * # Safety
 * `model` is a live handle, `features` points to `rows × dim` doubles and
 * `out` to `out_len` writable doubles.
 */
SpStatus sp_model_predict_scores(const SpModel *model,
                                 const double *features,
                                 size_t rows,
                                 size_t dim,
                                 double *out,
                                 size_t out_len);

/**
 * Deterministic offline embedding of `text` into `out` (`dim` doubles).
 *
 * # Safety
 * `text` is a NUL-terminated string and `out` points to `dim` writable
 * doubles.
 */
SpStatus sp_pseudo_embed(const char *text, size_t dim, uint64_t seed, double *out);

/**
 * Normalized review text as a new string in `*out`.
 *
 * # Safety
 * `text` is a NUL-terminated string and `out` is a valid pointer.
 */
SpStatus sp_clean_text(const char *text, char **out);

/**
 * Renders a report JSON document as the fixed-width table.
 *
 * # Safety
 * `json` is a NUL-terminated string and `out` is a valid pointer.
 */
SpStatus sp_report_format(const char *json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SENTIPIPE_H */
