#ifndef VAREXP_H
#define VAREXP_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum VxStatus {
  VX_STATUS_OK = 0,
  VX_STATUS_NULL_POINTER = 1,
  VX_STATUS_INVALID_ARGUMENT = 2,
  VX_STATUS_PARSE = 3,
  VX_STATUS_NON_ADMISSIBLE = 4,
  VX_STATUS_ZERO_FIELD = 5,
  VX_STATUS_NON_CONVERGENCE = 6,
  VX_STATUS_IO = 7,
  VX_STATUS_PANIC = 8,
} VxStatus;

/**
 * Norm variant selector: `0` weighted (`dx/p`), `1` classical.
 */
typedef enum VxNormVariant {
  VX_NORM_VARIANT_WEIGHTED = 0,
  VX_NORM_VARIANT_CLASSICAL = 1,
} VxNormVariant;

/**
 * Opaque triangulated domain.
 */
typedef struct VxGrid VxGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *vx_last_error(void);

/**
 * Builds a grid from a flat JSON domain such as
 * `{"shape": "disk", "r": 1, "n": 64}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VxStatus vx_grid_from_json(const char *json, struct VxGrid **out);

/**
 * Grid on the rectangle `[0, w] x [0, h]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VxStatus vx_grid_rectangle(double w, double h, uint32_t n, struct VxGrid **out);

/**
 * Grid on the disk of radius `r` centred at the origin.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VxStatus vx_grid_disk(double r, uint32_t n, struct VxGrid **out);

/**
 * Releases a grid. Null is ignored.
 *
 * # Safety
 * `grid` must come from a `vx_grid_*` constructor and not be used afterwards.
 */
void vx_grid_free(struct VxGrid *grid);

/**
 * Number of lattice nodes (the length of every field buffer); 0 for null.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t vx_grid_node_count(const struct VxGrid *grid);

/**
 * Copies node coordinates as interleaved `x, y` pairs (`2 * node_count` values).
 *
 * # Safety
 * `grid` must be a live handle and `xy` hold `len` doubles.
 */
enum VxStatus vx_grid_nodes(const struct VxGrid *grid, double *xy, size_t len);

/**
 * Luxemburg norm of the nodal field `values` for the exponent `p_expr`.
 *
 * # Safety
 * `grid` must be a live handle, `values` hold `len` doubles, `p_expr` be
 * NUL-terminated and `out` valid.
 */
enum VxStatus vx_luxemburg_norm(const struct VxGrid *grid,
                                const double *values,
                                size_t len,
                                const char *p_expr,
                                enum VxNormVariant variant,
                                double *out);

/**
 * Luxemburg norm of the gradient of the nodal field `values`.
 *
 * # Safety
 * Same contract as [`vx_luxemburg_norm`].
 */
enum VxStatus vx_gradient_norm(const struct VxGrid *grid,
                               const double *values,
                               size_t len,
                               const char *p_expr,
                               enum VxNormVariant variant,
                               double *out);

/**
 * Boundary distance at the nodes and `Λ_∞ = 1/‖d‖_∞`.
 *
 * # Safety
 * `grid` must be a live handle, `d_out` hold `len` doubles and
 * `lambda_inf` be valid or null.
 */
enum VxStatus vx_distance(const struct VxGrid *grid, double *d_out, size_t len, double *lambda_inf);

/**
 * First eigenvalue of `‖∇u‖_{p(x)}/‖u‖_{q(x)}` with default solver settings.
 * The minimizer (sup norm 1) goes to `u_out`, which may be null. Returns
 * `NonConvergence` with the outputs filled in if tolerances were not met.
 *
 * # Safety
 * `grid` must be a live handle, the expressions NUL-terminated, `lambda`
 * valid and `u_out` null or holding `len` doubles.
 */
enum VxStatus vx_minimize(const struct VxGrid *grid,
                          const char *p_expr,
                          const char *q_expr,
                          double *lambda,
                          double *u_out,
                          size_t len);

/**
 * `μ_l = min ‖∇u‖_{l·p(x)}/‖u‖_∞`; the extremal goes to `w_out` (may be null).
 *
 * # Safety
 * Same contract as [`vx_minimize`].
 */
enum VxStatus vx_direct_mu(const struct VxGrid *grid,
                           const char *p_expr,
                           uint32_t l,
                           double *mu,
                           double *w_out,
                           size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VAREXP_H */
