#ifndef PRESCIENT_H
#define PRESCIENT_H

/* Generated by cbindgen from the prescient-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PrescientStatus {
  PRESCIENT_STATUS_OK = 0,
  PRESCIENT_STATUS_NULL_POINTER = 1,
  PRESCIENT_STATUS_INVALID_ARGUMENT = 2,
  PRESCIENT_STATUS_CONFIG = 3,
  PRESCIENT_STATUS_DATA = 4,
  PRESCIENT_STATUS_CHECKPOINT = 5,
  PRESCIENT_STATUS_IO = 6,
  PRESCIENT_STATUS_NUMERIC = 7,
  PRESCIENT_STATUS_PANIC = 8,
} PrescientStatus;

/**
 * A loaded checkpoint.
 */
typedef struct PrescientModel PrescientModel;

/**
 * Online proactive detector over one row stream.
 */
typedef struct PrescientStream PrescientStream;

/**
 * One emitted judgement. `valid` is 0 when nothing was emitted.
 */
typedef struct PrescientEvent {
  uint8_t valid;
  uint8_t flag;
  uint64_t timestamp;
  double score;
} PrescientEvent;

/**
 * Everything one pushed row produces.
 */
typedef struct PrescientStep {
  /**
   * The next timestamp, judged from its forecast alone.
   */
  struct PrescientEvent proactive;
  /**
   * The row just pushed, judged against the forecast made for it.
   */
  struct PrescientEvent reactive;
} PrescientStep;

typedef struct PrescientF1 {
  double precision;
  double recall;
  double f1;
} PrescientF1;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *prescient_last_error(void);

/**
 * Loads a checkpoint file into `*out`.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum PrescientStatus prescient_model_load(const char *path, struct PrescientModel **out);

/**
 * # Safety
 * `model` must come from [`prescient_model_load`] and not be freed twice.
 */
void prescient_model_free(struct PrescientModel *model);

/**
 * Number of feature columns `D`, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t prescient_model_features(const struct PrescientModel *model);

/**
 * Rows the model reads: `W` for a forward model, `H` for a backward one.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t prescient_model_input_rows(const struct PrescientModel *model);

/**
 * Rows the model writes: `H` for a forward model, `W` for a backward one.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t prescient_model_output_rows(const struct PrescientModel *model);

/**
 * Runs the model on a row-major `[input_rows, D]` window in original
 * units and writes the row-major `[output_rows, D]` result to `out`.
 * Continuous columns are in original units, discrete columns are
 * probabilities.
 *
 * # Safety
 * `input` must hold `input_len` doubles and `out` room for `out_len`.
 */
enum PrescientStatus prescient_model_forecast(const struct PrescientModel *model,
                                              const double *input,
                                              size_t input_len,
                                              double *out,
                                              size_t out_len);

/**
 * Starts a stream over a forward model with a calibrated checkpoint.
 *
 * # Safety
 * `model` must be a live handle that outlives the stream; `out` must be writable.
 */
enum PrescientStatus prescient_stream_new(const struct PrescientModel *model,
                                          struct PrescientStream **out);

/**
 * Pushes one row of `len == D` values in original units.
 *
 * # Safety
 * `row` must hold `len` doubles and `out` must be writable.
 */
enum PrescientStatus prescient_stream_push(struct PrescientStream *stream,
                                           const double *row,
                                           size_t len,
                                           struct PrescientStep *out);

/**
 * # Safety
 * `stream` must come from [`prescient_stream_new`] and not be freed twice.
 */
void prescient_stream_free(struct PrescientStream *stream);

/**
 * Point-wise F1 of `flags` against `labels`.
 *
 * # Safety
 * `flags` and `labels` must hold `len` bytes each; `out` must be writable.
 */
enum PrescientStatus prescient_f1_point(const uint8_t *flags,
                                        const uint8_t *labels,
                                        size_t len,
                                        struct PrescientF1 *out);

/**
 * Composite F1: point-wise precision with event-wise recall.
 *
 * # Safety
 * As for [`prescient_f1_point`].
 */
enum PrescientStatus prescient_f1_composite(const uint8_t *flags,
                                            const uint8_t *labels,
                                            size_t len,
                                            struct PrescientF1 *out);

/**
 * Range-based F1.
 *
 * # Safety
 * As for [`prescient_f1_point`].
 */
enum PrescientStatus prescient_f1_range(const uint8_t *flags,
                                        const uint8_t *labels,
                                        size_t len,
                                        struct PrescientF1 *out);

/**
 * F1 of the Top-K flags, `K` being the number of positive labels.
 *
 * # Safety
 * `scores` must hold `len` doubles, `labels` `len` bytes; `out` must be writable.
 */
enum PrescientStatus prescient_f1_at_k(const double *scores,
                                       const uint8_t *labels,
                                       size_t len,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRESCIENT_H */
