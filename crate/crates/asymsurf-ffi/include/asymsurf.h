#ifndef ASYMSURF_H
#define ASYMSURF_H

/* Generated by cbindgen from the asymsurf-ffi crate. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Sign branch used when inverting `(K, H)` into `(a, alpha)`.
 */
typedef enum AsfBranch {
  ASF_BRANCH_PLUS = 0,
  ASF_BRANCH_MINUS = 1,
} AsfBranch;

/**
 * Scalar attached to each node of an invariant field.
 */
typedef enum AsfComponent {
  /**
   * `a = <x, y>`, the frame angle invariant.
   */
  ASF_COMPONENT_A = 0,
  /**
   * `alpha`, the normal curvature invariant.
   */
  ASF_COMPONENT_ALPHA = 1,
  /**
   * `f = (log sqrt(1+a^2) - log |alpha|) / 2`.
   */
  ASF_COMPONENT_F = 2,
  /**
   * Geodesic-curvature invariant of the `u` lines.
   */
  ASF_COMPONENT_GAMMA1 = 3,
  /**
   * Geodesic-curvature invariant of the `v` lines.
   */
  ASF_COMPONENT_GAMMA2 = 4,
  /**
   * `sqrt(E)`.
   */
  ASF_COMPONENT_SQRT_E = 5,
  /**
   * `sqrt(-G)`.
   */
  ASF_COMPONENT_SQRT_MINUS_G = 6,
} AsfComponent;

/**
 * Result code of every `asf_` call.
 */
typedef enum AsfStatus {
  /**
   * The call succeeded and all out parameters were written.
   */
  ASF_STATUS_OK = 0,
  /**
   * A NULL pointer, bad buffer length, malformed UTF-8, or an invalid
   * grid/base description.
   */
  ASF_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A coordinate expression failed to parse.
   */
  ASF_STATUS_PARSE = 2,
  /**
   * A coordinate expression failed to evaluate, or the surface is
   * degenerate at a sample point.
   */
  ASF_STATUS_EVAL = 3,
  /**
   * The data lie outside the method's domain (not time-like, not
   * asymptotic, `K <= 0`, or `K - H^2 <= 0`).
   */
  ASF_STATUS_NOT_APPLICABLE = 4,
  /**
   * A numerical budget was exceeded (divergence, drift, closure, or an
   * unresolved marching step).
   */
  ASF_STATUS_NUMERIC = 5,
  /**
   * An internal invariant was violated; the library state is still
   * consistent but the call produced nothing.
   */
  ASF_STATUS_PANIC = 6,
} AsfStatus;

/**
 * Opaque handle to the invariants of a surface, sampled on its grid.
 */
typedef struct AsfInvariants AsfInvariants;

/**
 * Opaque handle to a finished reconstruction run.
 */
typedef struct AsfReconstruction AsfReconstruction;

/**
 * Opaque handle to a parsed surface definition with its grid and base point.
 */
typedef struct AsfSurface AsfSurface;

/**
 * Fundamental forms and curvatures at one parameter point.
 */
typedef struct AsfForms {
  double e;
  double f;
  double g;
  double l;
  double m;
  double n;
  double k;
  double h;
} AsfForms;

/**
 * Patch-level classification summary. Ranges are over all grid nodes.
 */
typedef struct AsfClassification {
  double k_min;
  double k_max;
  double h_min;
  double h_max;
  double k_minus_h2_min;
  double k_minus_h2_max;
  /**
   * True when `E = G = 0` across the patch (null parameter lines).
   */
  bool isotropic;
  /**
   * True when the patch admits the asymptotic-invariant construction.
   */
  bool applicable;
} AsfClassification;

/**
 * Largest finite compatibility residuals of an invariant field.
 */
typedef struct AsfResiduals {
  double gauss;
  double codazzi_first;
  double codazzi_second;
  double system_first;
  double system_second;
} AsfResiduals;

/**
 * Verdict of a canonicity test at a base point.
 */
typedef struct AsfCanonicity {
  bool canonical;
  /**
   * `max(|phi - 1|, |psi - 1|)` over the patch axes.
   */
  double deviation;
  /**
   * Residual variation of the gauge candidates along the projected axis.
   */
  double cross_variation;
} AsfCanonicity;

/**
 * Health metrics of a reconstruction run.
 */
typedef struct AsfDiagnostics {
  double phi_psi_residual;
  double integrability;
  double gauss_residual;
  double codazzi_phi_residual;
  double codazzi_psi_residual;
  /**
   * Interior nodes skipped by the condition checks because their
   * denominators vanish.
   */
  size_t masked_nodes;
  double gram_drift;
  double closure;
} AsfDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library, as a static NUL-terminated string.
 */
const char *asf_version(void);

/**
 * Description of the most recent failure on this thread. Also set by
 * `asf_surface_classify` to the rejection reason whenever it reports a
 * patch as not applicable.
 */
const char *asf_last_error_message(void);

/**
 * Parse a surface `(x(u,v), y(u,v), z(u,v))` on the grid
 * `[u_min, u_max] x [v_min, v_max]` with `nu x nv` nodes and base point
 * `(u0, v0)`. The third coordinate is the time-like direction.
 *
 * # Safety
 * `x`, `y`, `z` must be NUL-terminated strings and `out` a valid pointer.
 */
enum AsfStatus asf_surface_new(const char *x,
                               const char *y,
                               const char *z,
                               double u_min,
                               double u_max,
                               double v_min,
                               double v_max,
                               size_t nu,
                               size_t nv,
                               double u0,
                               double v0,
                               struct AsfSurface **out);

/**
 * Release a surface handle. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from `asf_surface_new`.
 */
void asf_surface_free(struct AsfSurface *s);

/**
 * Fundamental forms and curvatures of the surface at `(u, v)`.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum AsfStatus asf_surface_forms_at(const struct AsfSurface *s,
                                    double u,
                                    double v,
                                    struct AsfForms *out);

/**
 * Classify the whole patch. Returns `ASF_STATUS_OK` even for rejected
 * patches: `applicable` carries the verdict and, when it is false, the
 * rejection reason is stored where `asf_last_error_message` reads it.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum AsfStatus asf_surface_classify(const struct AsfSurface *s, struct AsfClassification *out);

/**
 * Sample the surface positions over its grid into `out`, interleaved as
 * `x1, x2, x3` per node; `len` must equal `3 * nu * nv`.
 *
 * # Safety
 * `s` must be valid and `out` must point to `len` writable doubles.
 */
enum AsfStatus asf_surface_positions(const struct AsfSurface *s, double *out, size_t len);

/**
 * Compute the asymptotic invariants of the surface over its grid.
 *
 * # Safety
 * `s` and `out` must be valid pointers.
 */
enum AsfStatus asf_surface_invariants(const struct AsfSurface *s, struct AsfInvariants **out);

/**
 * Release an invariants handle. NULL is ignored.
 *
 * # Safety
 * `inv` must be NULL or a pointer obtained from `asf_surface_invariants`.
 */
void asf_invariants_free(struct AsfInvariants *inv);

/**
 * Grid dimensions of an invariant field.
 *
 * # Safety
 * All pointers must be valid.
 */
enum AsfStatus asf_invariants_dims(const struct AsfInvariants *inv, size_t *nu, size_t *nv);

/**
 * Copy one scalar component of the invariant field into `out`
 * (row-major, `v` outer); `len` must equal `nu * nv`.
 *
 * # Safety
 * `inv` must be valid and `out` must point to `len` writable doubles.
 */
enum AsfStatus asf_invariants_component(const struct AsfInvariants *inv,
                                        enum AsfComponent which,
                                        double *out,
                                        size_t len);

/**
 * Largest finite compatibility residuals of the invariant field.
 *
 * # Safety
 * `inv` and `out` must be valid pointers.
 */
enum AsfStatus asf_invariants_residuals(const struct AsfInvariants *inv, struct AsfResiduals *out);

/**
 * Test whether the parameters are canonical at base `(u0, v0)`: both gauge
 * functions within `tol` of 1.
 *
 * # Safety
 * `inv` and `out` must be valid pointers.
 */
enum AsfStatus asf_invariants_canonicity(const struct AsfInvariants *inv,
                                         double u0,
                                         double v0,
                                         double tol,
                                         struct AsfCanonicity *out);

/**
 * Rebuild a surface patch from curvature grids `k` and `h` (each `nu * nv`
 * doubles, row-major with `v` outer) over the given domain. The run starts
 * at grid point `(u0, v0)` and places it at `(x1, x2, x3)`.
 *
 * # Safety
 * `k` and `h` must point to `nu * nv` readable doubles and `out` must be a
 * valid pointer.
 */
enum AsfStatus asf_reconstruct_from_kh(const double *k,
                                       const double *h,
                                       size_t nu,
                                       size_t nv,
                                       double u_min,
                                       double u_max,
                                       double v_min,
                                       double v_max,
                                       enum AsfBranch branch,
                                       double u0,
                                       double v0,
                                       double x1,
                                       double x2,
                                       double x3,
                                       struct AsfReconstruction **out);

/**
 * Release a reconstruction handle. NULL is ignored.
 *
 * # Safety
 * `r` must be NULL or a pointer obtained from `asf_reconstruct_from_kh`.
 */
void asf_reconstruction_free(struct AsfReconstruction *r);

/**
 * Copy the reconstructed positions into `out`, interleaved as
 * `x1, x2, x3` per node; `len` must equal `3 * nu * nv`.
 *
 * # Safety
 * `r` must be valid and `out` must point to `len` writable doubles.
 */
enum AsfStatus asf_reconstruction_positions(const struct AsfReconstruction *r,
                                            double *out,
                                            size_t len);

/**
 * Diagnostics recorded by a reconstruction run.
 *
 * # Safety
 * `r` and `out` must be valid pointers.
 */
enum AsfStatus asf_reconstruction_diagnostics(const struct AsfReconstruction *r,
                                              struct AsfDiagnostics *out);

/**
 * March the hyperbolic equation `omega_uv + cosh(omega) = 0` from
 * characteristic data `bottom` (`nu` doubles on `v = v_min`) and `left`
 * (`nv` doubles on `u = u_min`). Writes the `nu * nv` solution grid to
 * `omega_out` and, when non-NULL, the largest cell defect of the marching
 * scheme to `scheme_residual_out`.
 *
 * # Safety
 * `bottom` and `left` must point to `nu` resp. `nv` readable doubles and
 * `omega_out` to `len` writable doubles.
 */
enum AsfStatus asf_solve_cosh_gordon(const double *bottom,
                                     size_t nu,
                                     const double *left,
                                     size_t nv,
                                     double u_min,
                                     double u_max,
                                     double v_min,
                                     double v_max,
                                     double *omega_out,
                                     size_t len,
                                     double *scheme_residual_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASYMSURF_H */
