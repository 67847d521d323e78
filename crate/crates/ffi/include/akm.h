#ifndef AKM_H
#define AKM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AkmStatus {
  AKM_STATUS_OK = 0,
  AKM_STATUS_NULL_ARGUMENT = 1,
  AKM_STATUS_INVALID_UTF8 = 2,
  AKM_STATUS_INVALID_ARGUMENT = 3,
  AKM_STATUS_IO = 4,
  AKM_STATUS_PARSE = 5,
  AKM_STATUS_RUN = 6,
  AKM_STATUS_PANIC = 7,
} AkmStatus;

/**
 * Vector store paired with the built-in hashing embedder.
 */
typedef struct AkmStore AkmStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *akm_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library and not yet freed.
 */
void akm_string_free(char *s);

/**
 * Library version as a static string.
 */
const char *akm_version(void);

/**
 * Parses a markdown record into its JSON form.
 *
 * # Safety
 * `markdown` must be a valid C string; `out_json` must be writable.
 */
enum AkmStatus akm_adr_parse(const char *markdown, char **out_json);

/**
 * Renders a record given as JSON into markdown.
 *
 * # Safety
 * `adr_json` must be a valid C string; `out_markdown` must be writable.
 */
enum AkmStatus akm_adr_render(const char *adr_json, char **out_markdown);

/**
 * Creates an empty store. Never returns NULL.
 */
struct AkmStore *akm_store_new(void);

/**
 * Loads a JSONL store file into a new handle.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum AkmStatus akm_store_load(const char *path, struct AkmStore **out);

/**
 * # Safety
 * `store` must be a live handle; `path` a valid C string.
 */
enum AkmStatus akm_store_save(const struct AkmStore *store, const char *path);

/**
 * # Safety
 * `store` must be NULL or a live handle, which is invalid afterwards.
 */
void akm_store_free(struct AkmStore *store);

/**
 * Number of documents; 0 for NULL.
 *
 * # Safety
 * `store` must be NULL or a live handle.
 */
size_t akm_store_len(const struct AkmStore *store);

/**
 * Embeds `text` with the hashing embedder and upserts it under `doc_id`.
 *
 * # Safety
 * `store` must be a live handle; `doc_id` and `text` valid C strings.
 */
enum AkmStatus akm_store_add_text(struct AkmStore *store, const char *doc_id, const char *text);

/**
 * Upserts a caller-supplied vector of `len` doubles.
 *
 * # Safety
 * `store` must be a live handle; `vector` must point to `len` readable doubles.
 */
enum AkmStatus akm_store_add_vector(struct AkmStore *store,
                                    const char *doc_id,
                                    const char *text,
                                    const double *vector,
                                    size_t len);

/**
 * Top-`k` hits for `query` as a JSON array of `{doc_id, score, text}`.
 *
 * # Safety
 * `store` must be a live handle; `query` a valid C string; `out_json` writable.
 */
enum AkmStatus akm_store_search(const struct AkmStore *store,
                                const char *query,
                                size_t k,
                                char **out_json);

/**
 * Runs the pipeline selected by `config_json` (a config document; `{}` for
 * defaults) on `repo`. On success `out_exit_code` receives the CLI exit code
 * for the run status and `out_run_json` the full run record.
 *
 * # Safety
 * String arguments must be valid C strings; output pointers writable.
 */
enum AkmStatus akm_run(const char *repo,
                       const char *config_json,
                       int32_t *out_exit_code,
                       char **out_run_json);

/**
 * Replays the run recorded in `run_dir` into `out_dir`; `out_identical`
 * receives 1 when the replay reproduced the recorded records exactly.
 *
 * # Safety
 * String arguments must be valid C strings; `out_identical` writable.
 */
enum AkmStatus akm_replay(const char *run_dir, const char *out_dir, int32_t *out_identical);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AKM_H */
