#ifndef OCR_NOISE_H
#define OCR_NOISE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OcrnStatus {
  OCRN_STATUS_OK = 0,
  OCRN_STATUS_NULL_POINTER = 1,
  OCRN_STATUS_VALIDATION = 2,
  OCRN_STATUS_IO = 3,
  OCRN_STATUS_INVALID_UTF8 = 4,
  OCRN_STATUS_PANIC = 5,
} OcrnStatus;

// Opaque character language model handle.
typedef struct OcrnLm OcrnLm;

// Opaque confusion model handle.
typedef struct OcrnModel OcrnModel;

typedef struct OcrnEvalReport {
  double cer;
  double wer;
  uint64_t char_edits;
  uint64_t char_ref_total;
  uint64_t word_edits;
  uint64_t word_ref_total;
  uint64_t pair_count;
} OcrnEvalReport;

typedef struct OcrnDecoderParams {
  size_t beam_width;
  double lambda;
  double candidate_floor;
} OcrnDecoderParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *ocrn_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void ocrn_string_free(char *s);

// Codepoint-level Levenshtein distance.
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `out` must be writable.
enum OcrnStatus ocrn_edit_distance(const char *a, const char *b, size_t *out);

// Micro-averaged CER and WER over `n` hypothesis/reference pairs.
//
// # Safety
// `hyps` and `refs` must point to `n` NUL-terminated strings each.
enum OcrnStatus ocrn_evaluate(const char *const *hyps,
                              const char *const *refs,
                              size_t n,
                              struct OcrnEvalReport *out);

// Loads a confusion model from its JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum OcrnStatus ocrn_model_load(const char *path, struct OcrnModel **out);

// Estimates a confusion model from a clusters JSONL file with the
// default grouping thresholds.
//
// # Safety
// `clusters_path` must be a NUL-terminated string; `out` must be writable.
enum OcrnStatus ocrn_model_estimate(const char *clusters_path, struct OcrnModel **out);

// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum OcrnStatus ocrn_model_save(const struct OcrnModel *model, const char *path);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum OcrnStatus ocrn_model_average_cer(const struct OcrnModel *model, double *out);

// P(observed | clean) for two Unicode scalar values.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum OcrnStatus ocrn_model_prob(const struct OcrnModel *model,
                                uint32_t clean,
                                uint32_t observed,
                                double *out);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must come from this library and not have been freed.
void ocrn_model_free(struct OcrnModel *model);

// Loads a character language model from its JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum OcrnStatus ocrn_lm_load(const char *path, struct OcrnLm **out);

// Releases a language model handle. Null is ignored.
//
// # Safety
// `lm` must come from this library and not have been freed.
void ocrn_lm_free(struct OcrnLm *lm);

struct OcrnDecoderParams ocrn_decoder_params_default(void);

// Corrects one token. `params` may be null for the defaults.
//
// # Safety
// Handles must be live; `noisy` a NUL-terminated string; `out` writable.
enum OcrnStatus ocrn_correct_token(const struct OcrnModel *model,
                                   const struct OcrnLm *lm,
                                   const struct OcrnDecoderParams *params,
                                   const char *noisy,
                                   char **out);

// Uniform noise on one word, drawing from `replacement_set` (null for
// ASCII letters and digits). The random stream is selected by
// `(seed, index)`, matching record `index` of a seeded synthesis run.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum OcrnStatus ocrn_apply_uniform(const char *word,
                                   double rate,
                                   const char *replacement_set,
                                   uint64_t seed,
                                   uint64_t index,
                                   char **out);

// Realistic noise on one word from a confusion model, with the random
// stream selected by `(seed, index)`.
//
// # Safety
// `model` must be a live handle; `word` NUL-terminated; `out` writable.
enum OcrnStatus ocrn_apply_realistic(const struct OcrnModel *model,
                                     const char *word,
                                     uint64_t seed,
                                     uint64_t index,
                                     char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCR_NOISE_H */
