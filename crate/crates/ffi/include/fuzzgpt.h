#ifndef FUZZGPT_H
#define FUZZGPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_ARGUMENT = 1,
  FG_STATUS_INVALID_UTF8 = 2,
  FG_STATUS_INVALID_ARGUMENT = 3,
  FG_STATUS_IO = 4,
  FG_STATUS_PARSE = 5,
  FG_STATUS_PANIC = 6,
} FgStatus;

/**
 * Labeled examples loaded from a dataset JSONL file.
 */
typedef struct FgDataset FgDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *fg_last_error(void);

/**
 * Library version as a static string.
 */
const char *fg_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void fg_string_free(char *s);

/**
 * Loads a labeled dataset (JSONL) into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for a write.
 */
enum FgStatus fg_dataset_load(const char *path, struct FgDataset **out);

/**
 * Number of examples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle from [`fg_dataset_load`].
 */
uintptr_t fg_dataset_len(const struct FgDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle from [`fg_dataset_load`], not yet freed.
 */
void fg_dataset_free(struct FgDataset *ds);

/**
 * Renders a few-shot prompt for `target_api` from `k` randomly chosen
 * examples.
 *
 * # Safety
 * `ds` must be a live handle; `target_api` a NUL-terminated string; `out`
 * valid for a write.
 */
enum FgStatus fg_render_fewshot(const struct FgDataset *ds,
                                const char *target_api,
                                uintptr_t k,
                                uint64_t seed,
                                bool cot,
                                char **out);

/**
 * Renders the user message of an instruct prompt. `style` is one of
 * `baseline`, `unseen`, `creative`, `non-conventional`.
 *
 * # Safety
 * All string arguments must be NUL-terminated; `out` valid for a write.
 */
enum FgStatus fg_render_instruct(const char *target_api,
                                 const char *style,
                                 const char *library,
                                 char **out);

/**
 * # Safety
 * `raw` must be NUL-terminated; `out` valid for a write.
 */
enum FgStatus fg_clean_snippet(const char *raw, char **out);

/**
 * Parses a labeling completion into a dotted API name.
 *
 * # Safety
 * `completion` must be NUL-terminated; `out` valid for a write.
 */
enum FgStatus fg_parse_api_label(const char *completion, char **out);

/**
 * Crash signature id (`cause:key`). Pass a negative `signal` or
 * `exit_code` when unknown.
 *
 * # Safety
 * `stderr_tail` must be NUL-terminated; `out` valid for a write.
 */
enum FgStatus fg_crash_signature(int32_t signal,
                                 int32_t exit_code,
                                 const char *stderr_tail,
                                 char **out);

/**
 * Compares two backends' outputs, each a JSON array of values. Writes
 * whether they agree and the largest relative error among disagreeing
 * elements (0 when consistent).
 *
 * # Safety
 * `a_json` and `b_json` must be NUL-terminated; the out pointers valid
 * for writes.
 */
enum FgStatus fg_adjudicate_diff(const char *a_json,
                                 const char *b_json,
                                 double rtol,
                                 double atol,
                                 bool *out_consistent,
                                 double *out_max_rel_err);

/**
 * # Safety
 * `code` must be NUL-terminated; `out` valid for a write.
 */
enum FgStatus fg_normalize_program(const char *code, char **out);

/**
 * Summarizes a campaign from its program and verdict JSONL files; writes
 * the summary as JSON.
 *
 * # Safety
 * Both paths must be NUL-terminated; `out` valid for a write.
 */
enum FgStatus fg_summarize_files(const char *programs_path, const char *verdicts_path, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FUZZGPT_H */
