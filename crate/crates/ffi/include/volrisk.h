#ifndef VOLRISK_H
#define VOLRISK_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VrModelKind {
  VR_MODEL_KIND_LSTM_RV = 0,
  VR_MODEL_KIND_LSTM = 1,
  VR_MODEL_KIND_HAR = 2,
  VR_MODEL_KIND_HARQ = 3,
  VR_MODEL_KIND_HARQF = 4,
  VR_MODEL_KIND_ARFIMA = 5,
} VrModelKind;

// Result of every fallible call.
typedef enum VrStatus {
  VR_STATUS_OK = 0,
  // A required pointer argument was null.
  VR_STATUS_NULL_POINTER = 1,
  // An argument is out of range or inconsistent.
  VR_STATUS_INVALID_ARGUMENT = 2,
  // Not enough observations, exceedances or violations.
  VR_STATUS_INSUFFICIENT_DATA = 3,
  // A numerical routine failed.
  VR_STATUS_COMPUTATION = 4,
  // Model text could not be parsed or produced.
  VR_STATUS_SERIALIZATION = 5,
  // The engine panicked; this is a bug.
  VR_STATUS_PANIC = 6,
} VrStatus;

typedef enum VrTail {
  // Losses of a long position (negative returns).
  VR_TAIL_LEFT = 0,
  // Losses of a short position (positive returns).
  VR_TAIL_RIGHT = 1,
} VrTail;

// Fitted generalized Pareto tail.
typedef struct VrGpdFit VrGpdFit;

// Fitted volatility model.
typedef struct VrModel VrModel;

typedef struct VrAccuracy {
  double mse;
  double mae;
  double qlike;
  double mape;
} VrAccuracy;

typedef struct VrGpdParams {
  double xi;
  double beta;
  // Threshold in the tail-oriented (positive) direction.
  double u;
  size_t n;
  size_t n_u;
} VrGpdParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *vr_last_error_message(void);

// Realized variance of one day: the sum of squared log returns between
// consecutive intraday prices.
//
// # Safety
// `prices` must point to `n` values; `out` must be writable.
enum VrStatus vr_realized_variance(const double *prices, size_t n, double *out);

// Realized quarticity of one day, `(m/3) * sum r^4` over the `m` returns.
//
// # Safety
// `prices` must point to `n` values; `out` must be writable.
enum VrStatus vr_realized_quarticity(const double *prices, size_t n, double *out);

// Kupiec unconditional coverage for `x` violations in `n` days.
//
// # Safety
// `lr` and `p_value` must be writable.
enum VrStatus vr_kupiec_uc(size_t n, size_t x, double p0, double *lr, double *p_value);

// Christoffersen independence test on a 0/1 violation sequence.
//
// # Safety
// `indicators` must point to `n` bytes; `lr` and `p_value` must be writable.
enum VrStatus vr_christoffersen_ind(const uint8_t *indicators,
                                    size_t n,
                                    double *lr,
                                    double *p_value);

// MSE, MAE, QLIKE and MAPE of `forecast` against `actual`.
//
// # Safety
// `actual` and `forecast` must point to `n` values; `out` must be writable.
enum VrStatus vr_accuracy(const double *actual,
                          const double *forecast,
                          size_t n,
                          struct VrAccuracy *out);

// Tail quantile of a GPD tail given directly by its parameters.
//
// # Safety
// `out` must be writable.
enum VrStatus vr_evt_quantile(double u,
                              double beta,
                              double xi,
                              size_t n,
                              size_t n_u,
                              double p0,
                              double *out);

// Fit a GPD to one tail of a standardized sample. On success `*out` owns a
// new handle.
//
// # Safety
// `values` must point to `n` values; `out` must be writable.
enum VrStatus vr_gpd_fit(const double *values, size_t n, enum VrTail tail, struct VrGpdFit **out);

// # Safety
// `fit` must be a live handle; `out` must be writable.
enum VrStatus vr_gpd_params(const struct VrGpdFit *fit, struct VrGpdParams *out);

// Tail quantile exceeded with probability `p0`, as a positive magnitude in
// the fitted tail's direction.
//
// # Safety
// `fit` must be a live handle; `out` must be writable.
enum VrStatus vr_gpd_quantile(const struct VrGpdFit *fit, double p0, double *out);

// # Safety
// `fit` must be null or a handle not yet freed.
void vr_gpd_free(struct VrGpdFit *fit);

// Fit a volatility model on `n` daily realized variances. `rq` (realized
// quarticity) is required by HARQ and HARQF and may be null otherwise;
// `companion` (the volume RV series) is required by LSTM-RV. `seed` drives
// LSTM initialization. On success `*out` owns a new handle.
//
// # Safety
// Non-null input pointers must point to `n` values; `out` must be writable.
enum VrStatus vr_model_fit(enum VrModelKind kind,
                           const double *rv,
                           const double *rq,
                           const double *companion,
                           size_t n,
                           uint64_t seed,
                           struct VrModel **out);

// Next-day variance forecast after the `n` observations given.
//
// # Safety
// `model` must be a live handle; non-null input pointers must point to `n`
// values; `out` must be writable.
enum VrStatus vr_model_forecast(const struct VrModel *model,
                                const double *rv,
                                const double *rq,
                                const double *companion,
                                size_t n,
                                double *out);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum VrStatus vr_model_kind(const struct VrModel *model, enum VrModelKind *out);

// Serialize a fitted model to JSON text. On success `*out` owns a string
// that must be released with [`vr_string_free`].
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum VrStatus vr_model_save(const struct VrModel *model, char **out);

// Restore a model saved by [`vr_model_save`].
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum VrStatus vr_model_load(const char *json, struct VrModel **out);

// # Safety
// `model` must be null or a handle not yet freed.
void vr_model_free(struct VrModel *model);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void vr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOLRISK_H */
