#ifndef LOVELOCK_H
#define LOVELOCK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LovelockStatus {
  LOVELOCK_STATUS_OK = 0,
  LOVELOCK_STATUS_NULL_POINTER = 1,
  LOVELOCK_STATUS_INVALID_UTF8 = 2,
  LOVELOCK_STATUS_INVALID_INPUT = 3,
  LOVELOCK_STATUS_DEGENERATE = 4,
  LOVELOCK_STATUS_NOT_KAHLER = 5,
  LOVELOCK_STATUS_DEGREE_NOT_BELOW_DIMENSION = 6,
  LOVELOCK_STATUS_NUMERICAL = 7,
  LOVELOCK_STATUS_OUT_OF_RANGE = 8,
  LOVELOCK_STATUS_RUN_FAILED = 9,
  LOVELOCK_STATUS_PANIC = 10,
} LovelockStatus;

typedef struct LovelockMetric LovelockMetric;

typedef struct LovelockReport LovelockReport;

typedef struct LovelockScenario LovelockScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next failing call on the same thread.
const char *lovelock_last_error(void);

// Library version as a static NUL-terminated string.
const char *lovelock_version(void);

// Parses a scenario from TOML text with `n_overrides` `key=value` strings.
//
// # Safety
// `toml` must be a NUL-terminated string; `overrides` must point to
// `n_overrides` such strings (or be NULL when `n_overrides` is 0); `out`
// must be writable.
enum LovelockStatus lovelock_scenario_parse(const char *toml,
                                            const char *const *overrides,
                                            size_t n_overrides,
                                            struct LovelockScenario **out);

// # Safety
// `s` must be NULL or a handle from [`lovelock_scenario_parse`] not yet freed.
void lovelock_scenario_free(struct LovelockScenario *s);

// Runs the scenario's suite. A report is written to `out` even when the
// run stops early, in which case the status is `RUN_FAILED`.
//
// # Safety
// `s` must be a live scenario handle and `out` writable.
enum LovelockStatus lovelock_run(const struct LovelockScenario *s, struct LovelockReport **out);

// # Safety
// `r` must be NULL or a handle from [`lovelock_run`] not yet freed.
void lovelock_report_free(struct LovelockReport *r);

// Whether every row passed and the run completed. False for NULL.
//
// # Safety
// `r` must be NULL or a live report handle.
bool lovelock_report_pass(const struct LovelockReport *r);

// Number of result rows; 0 for NULL.
//
// # Safety
// `r` must be NULL or a live report handle.
size_t lovelock_report_len(const struct LovelockReport *r);

// Relative residual (or check error) of row `i`.
//
// # Safety
// `r` must be a live report handle and `value` writable.
enum LovelockStatus lovelock_report_row(const struct LovelockReport *r,
                                        size_t i,
                                        double *value,
                                        bool *pass);

// Full report as JSON; free with [`lovelock_string_free`].
//
// # Safety
// `r` must be a live report handle and `out` writable.
enum LovelockStatus lovelock_report_json(const struct LovelockReport *r, char **out);

// # Safety
// `s` must be NULL or a string returned by this library, not yet freed.
void lovelock_string_free(char *s);

// Builds the scenario's background metric.
//
// # Safety
// `s` must be a live scenario handle and `out` writable.
enum LovelockStatus lovelock_metric_from_scenario(const struct LovelockScenario *s,
                                                  struct LovelockMetric **out);

// # Safety
// `m` must be NULL or a handle from [`lovelock_metric_from_scenario`].
void lovelock_metric_free(struct LovelockMetric *m);

// Real dimension `2m̄` of the metric; 0 for NULL.
//
// # Safety
// `m` must be NULL or a live metric handle.
size_t lovelock_metric_dim(const struct LovelockMetric *m);

// Euler integrand and top Chern density at `x` (length `2m̄`), as
// real and imaginary parts: `out[0..4] = [euler.re, euler.im, chern.re, chern.im]`.
//
// # Safety
// `m` must be a live metric handle, `x` must point to `len` doubles and
// `out` to 4 writable doubles.
enum LovelockStatus lovelock_metric_top_forms(const struct LovelockMetric *m,
                                              const double *x,
                                              size_t len,
                                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOVELOCK_H */
