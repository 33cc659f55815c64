#ifndef APOLLON_H
#define APOLLON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ApollonStatus {
  APOLLON_STATUS_OK = 0,
  APOLLON_STATUS_REJECTED = 1,
  APOLLON_STATUS_INFINITE_CROSS_RATIO = 2,
  APOLLON_STATUS_EMPTY_GRID = 3,
  APOLLON_STATUS_NOT_CONNECTED = 4,
  APOLLON_STATUS_SEGMENT_EXITS = 5,
  APOLLON_STATUS_UNSUPPORTED = 6,
  APOLLON_STATUS_NUMERICAL_FAULT = 7,
  APOLLON_STATUS_PARSE = 8,
  APOLLON_STATUS_NULL_ARGUMENT = 9,
  APOLLON_STATUS_PANIC = 10,
} ApollonStatus;

typedef enum ApollonMetric {
  APOLLON_METRIC_ALPHA = 0,
  APOLLON_METRIC_J = 1,
  APOLLON_METRIC_R = 2,
  APOLLON_METRIC_DELTA = 3,
  APOLLON_METRIC_H = 4,
  APOLLON_METRIC_K = 5,
} ApollonMetric;

typedef enum ApollonMethod {
  APOLLON_METHOD_EXACT = 0,
  APOLLON_METHOD_SAMPLED = 1,
  APOLLON_METHOD_GRID = 2,
} ApollonMethod;

typedef enum ApollonBound {
  APOLLON_BOUND_LOWER = 0,
  APOLLON_BOUND_UPPER = 1,
  APOLLON_BOUND_TWO_SIDED = 2,
} ApollonBound;

// Opaque domain handle.
typedef struct ApollonDomain ApollonDomain;

// Opaque map handle.
typedef struct ApollonMap ApollonMap;

// Metric parameters. `level` applies to alpha and delta, `c` to h. For k a positive
// `resolution` selects the grid backend at that spacing; zero selects the closed form.
typedef struct ApollonMetricParams {
  uint32_t level;
  double c;
  double resolution;
} ApollonMetricParams;

typedef struct ApollonEstimate {
  double value;
  enum ApollonMethod method;
  // Sampling level for sampled values, otherwise 0.
  uint32_t level;
  // Grid spacing for grid values, otherwise 0.
  double resolution;
  enum ApollonBound bound;
  double gap;
  bool pseudometric;
} ApollonEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the library; static, never freed.
const char *apollon_version(void);

// Copies the last error message of this thread into `buf` (truncated, NUL-terminated) and
// returns the full message length without the NUL. Returns 0 when the last call succeeded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t apollon_last_error(char *buf, size_t len);

// Parses a domain spec (JSON or TOML) into a new handle.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum ApollonStatus apollon_domain_parse(const char *spec, struct ApollonDomain **out);

// # Safety
// `domain` must be null or a handle from [`apollon_domain_parse`] not yet freed.
void apollon_domain_free(struct ApollonDomain *domain);

// Ambient dimension of the domain, 0 for a null handle.
//
// # Safety
// `domain` must be null or a live handle.
size_t apollon_domain_dim(const struct ApollonDomain *domain);

// Euclidean distance from `x` to the boundary.
//
// # Safety
// `domain` must be a live handle, `x` must point to `dim` doubles and `out` must be valid.
enum ApollonStatus apollon_dist_to_boundary(const struct ApollonDomain *domain,
                                            const double *x,
                                            size_t dim,
                                            double *out);

// Evaluates a metric at `(x, y)`.
//
// # Safety
// `domain` must be a live handle, `x` and `y` must point to `dim` doubles, `params` and `out`
// must be valid.
enum ApollonStatus apollon_metric(const struct ApollonDomain *domain,
                                  enum ApollonMetric metric,
                                  const struct ApollonMetricParams *params,
                                  const double *x,
                                  const double *y,
                                  size_t dim,
                                  struct ApollonEstimate *out);

// Cross ratio `|a-c| |b-d| / (|a-d| |b-c|)` of four finite points.
//
// # Safety
// `a`, `b`, `c`, `d` must point to `dim` doubles and `out` must be valid.
enum ApollonStatus apollon_cross_ratio(const double *a,
                                       const double *b,
                                       const double *c,
                                       const double *d,
                                       size_t dim,
                                       double *out);

// Parses a map spec (JSON or TOML) into a new handle.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum ApollonStatus apollon_map_parse(const char *spec, struct ApollonMap **out);

// # Safety
// `map` must be null or a handle from [`apollon_map_parse`] not yet freed.
void apollon_map_free(struct ApollonMap *map);

// Applies the map to the finite point `x`. When the image is ∞, `*at_infinity` is set and
// `out` is left untouched.
//
// # Safety
// `map` must be a live handle, `x` and `out` must point to `dim` doubles and `at_infinity`
// must be valid.
enum ApollonStatus apollon_map_apply(const struct ApollonMap *map,
                                     const double *x,
                                     size_t dim,
                                     double *out,
                                     bool *at_infinity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APOLLON_H */
