#ifndef PEAKSYNC_H
#define PEAKSYNC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  // A required pointer argument was null.
  PS_STATUS_NULL_ARGUMENT = 1,
  // Arguments violate a documented precondition.
  PS_STATUS_VALIDATION = 2,
  // Input data could not be parsed.
  PS_STATUS_PARSE = 3,
  // A file could not be read or written.
  PS_STATUS_IO = 4,
  // A string argument was not valid UTF-8.
  PS_STATUS_INVALID_STRING = 5,
  // An output buffer is too small.
  PS_STATUS_BUFFER_TOO_SMALL = 6,
  // Internal failure; the library state is unaffected.
  PS_STATUS_PANIC = 7,
} PsStatus;

typedef enum PsDensity {
  PS_DENSITY_GAUSSIAN = 0,
  PS_DENSITY_UNIFORM = 1,
} PsDensity;

typedef enum PsPolarity {
  PS_POLARITY_POSITIVE = 0,
  PS_POLARITY_NEGATIVE = 1,
  PS_POLARITY_BOTH = 2,
} PsPolarity;

// Opaque multichannel record.
typedef struct PsRecord PsRecord;

// Opaque weight vector.
typedef struct PsWeights PsWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ps_version(void);

// Message for the most recent failure on this thread, or null after a
// success. Valid until the next library call on the same thread.
const char *ps_last_error_message(void);

// Builds the lag weight vector for a symmetric density. `scale` is the
// Gaussian sigma or the uniform half-width.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum PsStatus ps_weights_build(double a0,
                               double tau,
                               enum PsDensity density,
                               double scale,
                               struct PsWeights **out);

// Half-support `n`; the vector has `2n + 1` entries. Returns 0 for null.
//
// # Safety
// `w` must be null or a live handle.
size_t ps_weights_half_support(const struct PsWeights *w);

// Number of coefficients (`2n + 1`). Returns 0 for null.
//
// # Safety
// `w` must be null or a live handle.
size_t ps_weights_len(const struct PsWeights *w);

// Copies `a_{-n} .. a_n` into `buf`, which must hold `ps_weights_len`
// values.
//
// # Safety
// `w` must be a live handle and `buf` valid for `cap` writes.
enum PsStatus ps_weights_copy(const struct PsWeights *w, double *buf, size_t cap);

// # Safety
// `w` must be null or a handle not yet freed.
void ps_weights_free(struct PsWeights *w);

// Loads a CSV or binary record.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for one write.
enum PsStatus ps_record_read(const char *path, double sample_rate_hz, struct PsRecord **out);

// Wraps row-major samples; channels are labelled `ch1`, `ch2`, ...
//
// # Safety
// `samples` must be valid for `n_channels * n_samples` reads and `out`
// for one write.
enum PsStatus ps_record_from_samples(const double *samples,
                                     size_t n_channels,
                                     size_t n_samples,
                                     double sample_rate_hz,
                                     struct PsRecord **out);

// # Safety
// `rec` must be null or a live handle.
size_t ps_record_n_channels(const struct PsRecord *rec);

// # Safety
// `rec` must be null or a live handle.
size_t ps_record_n_samples(const struct PsRecord *rec);

// # Safety
// `rec` must be null or a handle not yet freed.
void ps_record_free(struct PsRecord *rec);

// Marks threshold-crossing local maxima of one channel in `out` (0/1).
//
// # Safety
// `samples` and `out` must each be valid for `len` elements.
enum PsStatus ps_detect_peaks(const double *samples,
                              size_t len,
                              size_t window_len,
                              double multiplier,
                              enum PsPolarity polarity,
                              uint8_t *out);

// Pairwise synchronization series of two 0/1 trains of length `len`.
//
// # Safety
// `p1`, `p2` and `out` must each be valid for `len` elements; `w` must be
// a live handle.
enum PsStatus ps_pairwise_sync(const uint8_t *p1,
                               const uint8_t *p2,
                               size_t len,
                               const struct PsWeights *w,
                               double *out);

// Group synchronization series of `r` row-major 0/1 trains of length
// `len`.
//
// # Safety
// `trains` must be valid for `r * len` reads, `out` for `len` writes and
// `w` must be a live handle.
enum PsStatus ps_multi_sync(const uint8_t *trains,
                            size_t r,
                            size_t len,
                            const struct PsWeights *w,
                            double *out);

// Mean of `values[t0 .. t0 + span]`.
//
// # Safety
// `values` must be valid for `len` reads and `out` for one write.
enum PsStatus ps_compound(const double *values, size_t len, size_t t0, size_t span, double *out);

// Full pipeline over every channel of `rec`: optional default filtering
// (25-100 Hz band-pass, 49-51 Hz notch), default detection, then the
// group series, written to `out` (`ps_record_n_samples` values).
//
// # Safety
// `rec` and `w` must be live handles; `out` valid for `cap` writes.
enum PsStatus ps_record_sync(const struct PsRecord *rec,
                             bool apply_filter,
                             const struct PsWeights *w,
                             double *out,
                             size_t cap);

// Surrogate significance threshold over all channels of `rec` using the
// same pipeline as [`ps_record_sync`].
//
// # Safety
// `rec` and `w` must be live handles and `out` valid for one write.
enum PsStatus ps_significance_threshold(const struct PsRecord *rec,
                                        bool apply_filter,
                                        const struct PsWeights *w,
                                        size_t count,
                                        double percentile,
                                        uint64_t seed,
                                        double *out);

// Descending eigenvalues of the correlation matrix of `r` row-major
// channels of `m` samples, written to `out` (`r` values).
//
// # Safety
// `window` must be valid for `r * m` reads and `out` for `r` writes.
enum PsStatus ps_corr_eigenvalues(const double *window, size_t r, size_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEAKSYNC_H */
