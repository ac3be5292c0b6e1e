#ifndef USCT_FFI_H
#define USCT_FFI_H

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Zero is success.
typedef enum {
  USCT_STATUS_OK = 0,
  USCT_STATUS_NULL_POINTER = 1,
  USCT_STATUS_INVALID_INPUT = 2,
  USCT_STATUS_BUFFER_TOO_SMALL = 3,
  USCT_STATUS_CONFIG = 4,
  USCT_STATUS_IO = 5,
  USCT_STATUS_FORMAT = 6,
  USCT_STATUS_SOLVER = 7,
  USCT_STATUS_PANIC = 8,
} UsctStatus;

// Phantom family for [`usct_phantom_new`].
typedef enum {
  USCT_PHANTOM_KIND_BREAST_LIKE = 0,
  USCT_PHANTOM_KIND_BRAIN_LIKE = 1,
  USCT_PHANTOM_KIND_INCLUSION_TEST = 2,
} UsctPhantomKind;

// Sound-speed map on a centered square-cell grid.
typedef struct UsctMedium UsctMedium;

// Helmholtz solver bound to one medium and angular frequency.
typedef struct UsctSolver UsctSolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *usct_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *usct_last_error(void);

// Medium from `nx * ny` row-major speeds (m/s), background speed `c0`.
//
// # Safety
// `speeds` must point to `nx * ny` doubles; `out` must be writable.
UsctStatus usct_medium_new(size_t nx,
                           size_t ny,
                           double dx,
                           double c0,
                           const double *speeds,
                           UsctMedium **out);

// Seeded random phantom with default tissue ranges and water background.
//
// # Safety
// `out` must be writable.
UsctStatus usct_phantom_new(UsctPhantomKind kind,
                            size_t nx,
                            size_t ny,
                            double dx,
                            uint64_t seed,
                            UsctMedium **out);

// Reads a real container written by the toolkit as a medium.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
UsctStatus usct_medium_read(const char *path, double c0, UsctMedium **out);

// Writes the medium as a real64 container.
//
// # Safety
// `medium` must come from this library; `path` must be NUL-terminated.
UsctStatus usct_medium_write(const UsctMedium *medium, const char *path);

// Grid size of the medium.
//
// # Safety
// `medium` must come from this library; `nx`, `ny`, `dx` must be writable.
UsctStatus usct_medium_shape(const UsctMedium *medium, size_t *nx, size_t *ny, double *dx);

// Copies the row-major speeds into `buf` of `len` doubles.
//
// # Safety
// `medium` must come from this library; `buf` must hold `len` doubles.
UsctStatus usct_medium_speeds(const UsctMedium *medium, double *buf, size_t len);

// Releases a medium. Null is ignored.
//
// # Safety
// `medium` must come from this library and not be used afterwards.
void usct_medium_free(UsctMedium *medium);

// Solver for `medium` at angular frequency `omega` (rad/s). `tol` and
// `max_iter` of zero keep the defaults. The medium may be freed afterwards.
//
// # Safety
// `medium` must come from this library; `out` must be writable.
UsctStatus usct_solver_new(const UsctMedium *medium,
                           double omega,
                           double tol,
                           size_t max_iter,
                           UsctSolver **out);

// Field of a point source at `(x, y)` metres. `field` receives `nx * ny`
// interleaved (re, im) pairs, so `len` counts doubles and must be at least
// `2 * nx * ny`. `iterations` may be null.
//
// # Safety
// `solver` must come from this library; `field` must hold `len` doubles.
UsctStatus usct_solver_point_source(const UsctSolver *solver,
                                    double x,
                                    double y,
                                    double amplitude_re,
                                    double amplitude_im,
                                    double *field,
                                    size_t len,
                                    size_t *iterations);

// Releases a solver. Null is ignored.
//
// # Safety
// `solver` must come from this library and not be used afterwards.
void usct_solver_free(UsctSolver *solver);

// Full transmit/receive matrix for `count` transducers on a ring of
// `radius` metres around the grid center, every transducer firing with unit
// amplitude. `data` receives `count * count` interleaved (re, im) pairs,
// row = source, so `len` must be at least `2 * count * count`.
//
// # Safety
// `medium` must come from this library; `data` must hold `len` doubles.
UsctStatus usct_observe(const UsctMedium *medium,
                        double omega,
                        size_t count,
                        double radius,
                        double tol,
                        double *data,
                        size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USCT_FFI_H */
