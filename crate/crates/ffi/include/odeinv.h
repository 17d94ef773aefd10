#ifndef ODEINV_H
#define ODEINV_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum OdeinvStatus {
  ODEINV_STATUS_OK = 0,
  ODEINV_STATUS_NULL_POINTER = 1,
  ODEINV_STATUS_INVALID_UTF8 = 2,
  ODEINV_STATUS_PARSE = 3,
  ODEINV_STATUS_INVALID_ARGUMENT = 4,
  ODEINV_STATUS_DEGENERATE = 5,
  ODEINV_STATUS_EVALUATION = 6,
  ODEINV_STATUS_NO_CONVERGENCE = 7,
  ODEINV_STATUS_INTERNAL = 8,
} OdeinvStatus;

/**
 * Orbit class of an equation.
 */
typedef enum OdeinvOrbit {
  ODEINV_ORBIT_GENERAL_POSITION3 = 0,
  ODEINV_ORBIT_DEGENERATE2 = 1,
  ODEINV_ORBIT_DEGENERATE3 = 2,
  ODEINV_ORBIT_UNDETERMINED = 3,
} OdeinvOrbit;

/**
 * Outcome of an equivalence test.
 */
typedef enum OdeinvVerdict {
  ODEINV_VERDICT_EQUIVALENT = 0,
  ODEINV_VERDICT_NOT_EQUIVALENT = 1,
  ODEINV_VERDICT_INCONCLUSIVE = 2,
} OdeinvVerdict;

/**
 * Opaque symbolic invariants of a general-position equation.
 */
typedef struct OdeinvInvariants OdeinvInvariants;

/**
 * Opaque point map with its inverse and domain.
 */
typedef struct OdeinvMap OdeinvMap;

/**
 * Opaque equation `y'' = a3 p^3 + a2 p^2 + a1 p + a0`.
 */
typedef struct OdeinvOde OdeinvOde;

/**
 * Numeric invariants at a point.
 */
typedef struct OdeinvValues {
  double l1;
  double l2;
  double l3;
  double psi1;
  double psi2;
  double xi1[2];
  double xi2[2];
  double nu;
  double i1;
  double i2;
} OdeinvValues;

/**
 * Summary of an equivalence test.
 */
typedef struct OdeinvEquivResult {
  enum OdeinvVerdict verdict;
  double max_deviation;
  double coverage;
} OdeinvEquivResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *odeinv_version(void);

/**
 * Message of the most recent failed call on this thread; empty after a
 * successful call. Valid until the next call on the same thread.
 */
const char *odeinv_last_error(void);

/**
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void odeinv_string_free(char *s);

/**
 * Parses an equation file (`a0 = ...` through `a3 = ...`).
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is writable.
 */
enum OdeinvStatus odeinv_ode_parse(const char *text, struct OdeinvOde **out);

/**
 * Builds an equation from four coefficient expressions.
 *
 * # Safety
 * Each `a*` is a NUL-terminated string; `out` is writable.
 */
enum OdeinvStatus odeinv_ode_from_coefficients(const char *a0,
                                               const char *a1,
                                               const char *a2,
                                               const char *a3,
                                               struct OdeinvOde **out);

/**
 * # Safety
 * `ode` is null or a live handle.
 */
void odeinv_ode_free(struct OdeinvOde *ode);

/**
 * Writes the equation in file format.
 *
 * # Safety
 * `ode` is a live handle; `out` is writable.
 */
enum OdeinvStatus odeinv_ode_to_string(const struct OdeinvOde *ode, char **out);

/**
 * Parses a map file (`fx`, `fy`, `invx`, `invy`, `domain`).
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is writable.
 */
enum OdeinvStatus odeinv_map_parse(const char *text, struct OdeinvMap **out);

/**
 * # Safety
 * `map` is null or a live handle.
 */
void odeinv_map_free(struct OdeinvMap *map);

/**
 * Pushes `ode` forward along `map` into a new handle.
 *
 * # Safety
 * `ode` and `map` are live handles; `out` is writable.
 */
enum OdeinvStatus odeinv_transform(const struct OdeinvOde *ode,
                                   const struct OdeinvMap *map,
                                   struct OdeinvOde **out);

/**
 * Orbit class on the whole plane.
 *
 * # Safety
 * `ode` is a live handle; `out` is writable.
 */
enum OdeinvStatus odeinv_classify(const struct OdeinvOde *ode, enum OdeinvOrbit *out);

/**
 * Symbolic invariants; fails with `ODEINV_STATUS_DEGENERATE` when `L3 = 0`.
 *
 * # Safety
 * `ode` is a live handle; `out` is writable.
 */
enum OdeinvStatus odeinv_invariants_new(const struct OdeinvOde *ode, struct OdeinvInvariants **out);

/**
 * # Safety
 * `inv` is null or a live handle.
 */
void odeinv_invariants_free(struct OdeinvInvariants *inv);

/**
 * Evaluates the invariants at `(x, y)`.
 *
 * # Safety
 * `inv` is a live handle; `out` is writable.
 */
enum OdeinvStatus odeinv_invariants_eval(const struct OdeinvInvariants *inv,
                                         double x,
                                         double y,
                                         struct OdeinvValues *out);

/**
 * Symbolic invariants as a JSON document.
 *
 * # Safety
 * `inv` is a live handle; `out` is writable.
 */
enum OdeinvStatus odeinv_invariants_json(const struct OdeinvInvariants *inv, char **out);

/**
 * Canonical form sampled on an `n` by `n` grid, as JSON. `domain` points to
 * `{x0, x1, y0, y1}` or is null for the unit square.
 *
 * # Safety
 * `ode` is a live handle; `domain` is null or points to four doubles; `out`
 * is writable.
 */
enum OdeinvStatus odeinv_canonical_json(const struct OdeinvOde *ode,
                                        const double *domain_,
                                        size_t n,
                                        char **out);

/**
 * Decides point equivalence of two equations. `domain1` and `domain2` are
 * null or point to `{x0, x1, y0, y1}`; a null `domain2` reuses `domain1`.
 * `json_out` may be null; otherwise it receives the full report.
 *
 * # Safety
 * Handles are live; domains are null or point to four doubles; `out` is
 * writable; `json_out` is null or writable.
 */
enum OdeinvStatus odeinv_equiv(const struct OdeinvOde *ode1,
                               const struct OdeinvOde *ode2,
                               const double *domain1,
                               const double *domain2,
                               size_t n,
                               double tol,
                               struct OdeinvEquivResult *out,
                               char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ODEINV_H */
