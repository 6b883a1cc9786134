//! C ABI for the surface analysis and reconstruction library.
//!
//! Every entry point returns an [`AsfStatus`]; results travel through out
//! pointers, which are written only on `ASF_STATUS_OK`. On any other status
//! the outputs are untouched and [`asf_last_error_message`] holds a
//! NUL-terminated description, valid on the calling thread until the next
//! call that replaces it.
//!
//! `AsfSurface`, `AsfInvariants` and `AsfReconstruction` are opaque handles.
//! Functions never take ownership of a handle argument; release each handle
//! with its matching `_free`, which accepts NULL. Grid buffers are row-major
//! with `v` outer and `u` inner, the same layout the `asymsurf` CLI uses for
//! CSV grids.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use asymsurf::canonical::{is_canonical, CanonicalError};
use asymsurf::expr::Expr;
use asymsurf::grid::{GridSpec, ScalarField};
use asymsurf::invariants::{
    codazzi_residual, gauss_residual, invariant_field, system_residual, Branch, InvariantError,
    InvariantField,
};
use asymsurf::minkowski::MVec3;
use asymsurf::pde::{solve_cosh_gordon, GoursatProblem, PdeError};
use asymsurf::reconstruct::{reconstruct_from_kh, ReconstructError, ReconstructionRun};
use asymsurf::surface::{classify_patch, curvatures, forms_at, SurfaceDef};

/// Result code of every `asf_` call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsfStatus {
    /// The call succeeded and all out parameters were written.
    Ok = 0,
    /// A NULL pointer, bad buffer length, malformed UTF-8, or an invalid
    /// grid/base description.
    InvalidArgument = 1,
    /// A coordinate expression failed to parse.
    Parse = 2,
    /// A coordinate expression failed to evaluate, or the surface is
    /// degenerate at a sample point.
    Eval = 3,
    /// The data lie outside the method's domain (not time-like, not
    /// asymptotic, `K <= 0`, or `K - H^2 <= 0`).
    NotApplicable = 4,
    /// A numerical budget was exceeded (divergence, drift, closure, or an
    /// unresolved marching step).
    Numeric = 5,
    /// An internal invariant was violated; the library state is still
    /// consistent but the call produced nothing.
    Panic = 6,
}

/// Fundamental forms and curvatures at one parameter point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AsfForms {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
    pub n: f64,
    pub k: f64,
    pub h: f64,
}

/// Patch-level classification summary. Ranges are over all grid nodes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AsfClassification {
    pub k_min: f64,
    pub k_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub k_minus_h2_min: f64,
    pub k_minus_h2_max: f64,
    /// True when `E = G = 0` across the patch (null parameter lines).
    pub isotropic: bool,
    /// True when the patch admits the asymptotic-invariant construction.
    pub applicable: bool,
}

/// Largest finite compatibility residuals of an invariant field.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AsfResiduals {
    pub gauss: f64,
    pub codazzi_first: f64,
    pub codazzi_second: f64,
    pub system_first: f64,
    pub system_second: f64,
}

/// Verdict of a canonicity test at a base point.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AsfCanonicity {
    pub canonical: bool,
    /// `max(|phi - 1|, |psi - 1|)` over the patch axes.
    pub deviation: f64,
    /// Residual variation of the gauge candidates along the projected axis.
    pub cross_variation: f64,
}

/// Health metrics of a reconstruction run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AsfDiagnostics {
    pub phi_psi_residual: f64,
    pub integrability: f64,
    pub gauss_residual: f64,
    pub codazzi_phi_residual: f64,
    pub codazzi_psi_residual: f64,
    /// Interior nodes skipped by the condition checks because their
    /// denominators vanish.
    pub masked_nodes: usize,
    pub gram_drift: f64,
    pub closure: f64,
}

/// Scalar attached to each node of an invariant field.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsfComponent {
    /// `a = <x, y>`, the frame angle invariant.
    A = 0,
    /// `alpha`, the normal curvature invariant.
    Alpha = 1,
    /// `f = (log sqrt(1+a^2) - log |alpha|) / 2`.
    F = 2,
    /// Geodesic-curvature invariant of the `u` lines.
    Gamma1 = 3,
    /// Geodesic-curvature invariant of the `v` lines.
    Gamma2 = 4,
    /// `sqrt(E)`.
    SqrtE = 5,
    /// `sqrt(-G)`.
    SqrtMinusG = 6,
}

/// Sign branch used when inverting `(K, H)` into `(a, alpha)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsfBranch {
    Plus = 0,
    Minus = 1,
}

/// Opaque handle to a parsed surface definition with its grid and base point.
pub struct AsfSurface {
    def: SurfaceDef,
}

/// Opaque handle to the invariants of a surface, sampled on its grid.
pub struct AsfInvariants {
    field: InvariantField,
}

/// Opaque handle to a finished reconstruction run.
pub struct AsfReconstruction {
    run: ReconstructionRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|ch| ch != '\0');
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(msg).unwrap());
}

fn fail(status: AsfStatus, msg: impl Into<String>) -> AsfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> AsfStatus) -> AsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(AsfStatus::Panic, "internal panic in asymsurf"),
    }
}

/// NULL and length checks shared by the buffer-filling calls.
fn copy_out(values: &[f64], out: *mut f64, len: usize) -> AsfStatus {
    if out.is_null() {
        return fail(AsfStatus::InvalidArgument, "output buffer is NULL");
    }
    if len != values.len() {
        return fail(
            AsfStatus::InvalidArgument,
            format!("output buffer holds {len} values but the grid needs {}", values.len()),
        );
    }
    unsafe { slice::from_raw_parts_mut(out, len) }.copy_from_slice(values);
    AsfStatus::Ok
}

fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, AsfStatus> {
    if ptr.is_null() {
        return Err(fail(AsfStatus::InvalidArgument, format!("{what} is NULL")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(AsfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn invariant_status(e: &InvariantError) -> AsfStatus {
    match e {
        InvariantError::MethodNotApplicable { .. }
        | InvariantError::NotAsymptotic { .. }
        | InvariantError::WrongSignature { .. } => AsfStatus::NotApplicable,
        InvariantError::Surface(_) => AsfStatus::Eval,
        _ => AsfStatus::Numeric,
    }
}

fn reconstruct_status(e: &ReconstructError) -> AsfStatus {
    match e {
        ReconstructError::Staged { source, .. } => reconstruct_status(source),
        ReconstructError::Invariant(inner) => invariant_status(inner),
        ReconstructError::Grid(_)
        | ReconstructError::ShapeMismatch { .. }
        | ReconstructError::Frame(_) => AsfStatus::InvalidArgument,
        ReconstructError::AlphaSignChange { .. } => AsfStatus::NotApplicable,
        _ => AsfStatus::Numeric,
    }
}

fn pde_status(e: &PdeError) -> AsfStatus {
    match e {
        PdeError::Grid(_)
        | PdeError::Eval(_)
        | PdeError::CornerMismatch { .. }
        | PdeError::BoundaryLength { .. } => AsfStatus::InvalidArgument,
        PdeError::NonPositiveK { .. } => AsfStatus::NotApplicable,
        PdeError::Divergence { .. } => AsfStatus::Numeric,
    }
}

fn grid_spec(
    u_min: f64,
    u_max: f64,
    v_min: f64,
    v_max: f64,
    nu: usize,
    nv: usize,
) -> Result<GridSpec, AsfStatus> {
    let spec = GridSpec {
        u_min,
        u_max,
        v_min,
        v_max,
        nu,
        nv,
    };
    spec.validate()
        .map_err(|e| fail(AsfStatus::InvalidArgument, e.to_string()))?;
    Ok(spec)
}

/// Version of the library, as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn asf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Description of the most recent failure on this thread. Also set by
/// `asf_surface_classify` to the rejection reason whenever it reports a
/// patch as not applicable.
#[no_mangle]
pub extern "C" fn asf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse a surface `(x(u,v), y(u,v), z(u,v))` on the grid
/// `[u_min, u_max] x [v_min, v_max]` with `nu x nv` nodes and base point
/// `(u0, v0)`. The third coordinate is the time-like direction.
///
/// # Safety
/// `x`, `y`, `z` must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn asf_surface_new(
    x: *const c_char,
    y: *const c_char,
    z: *const c_char,
    u_min: f64,
    u_max: f64,
    v_min: f64,
    v_max: f64,
    nu: usize,
    nv: usize,
    u0: f64,
    v0: f64,
    out: *mut *mut AsfSurface,
) -> AsfStatus {
    guard(|| {
        if out.is_null() {
            return fail(AsfStatus::InvalidArgument, "out is NULL");
        }
        let mut coords = [Expr::Num(0.0), Expr::Num(0.0), Expr::Num(0.0)];
        for (slot, (ptr, name)) in coords
            .iter_mut()
            .zip([(x, "x"), (y, "y"), (z, "z")])
        {
            let text = match read_str(ptr, name) {
                Ok(t) => t,
                Err(status) => return status,
            };
            *slot = match Expr::parse(text) {
                Ok(e) => e,
                Err(e) => return fail(AsfStatus::Parse, format!("coordinate {name}: {e}")),
            };
        }
        let spec = match grid_spec(u_min, u_max, v_min, v_max, nu, nv) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match SurfaceDef::new(coords, spec, (u0, v0)) {
            Ok(def) => {
                unsafe { *out = Box::into_raw(Box::new(AsfSurface { def })) };
                AsfStatus::Ok
            }
            Err(e) => fail(AsfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Release a surface handle. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from `asf_surface_new`.
#[no_mangle]
pub unsafe extern "C" fn asf_surface_free(s: *mut AsfSurface) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

/// Fundamental forms and curvatures of the surface at `(u, v)`.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn asf_surface_forms_at(
    s: *const AsfSurface,
    u: f64,
    v: f64,
    out: *mut AsfForms,
) -> AsfStatus {
    guard(|| {
        if s.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "surface or out is NULL");
        }
        let def = &unsafe { &*s }.def;
        let fc = match forms_at(def, u, v) {
            Ok(fc) => fc,
            Err(e) => return fail(AsfStatus::Eval, e.to_string()),
        };
        let cur = match curvatures(&fc) {
            Ok(c) => c,
            Err(e) => return fail(AsfStatus::Eval, e.to_string()),
        };
        unsafe {
            *out = AsfForms {
                e: fc.e,
                f: fc.f,
                g: fc.g,
                l: fc.l,
                m: fc.m,
                n: fc.n,
                k: cur.k,
                h: cur.h,
            };
        }
        AsfStatus::Ok
    })
}

/// Classify the whole patch. Returns `ASF_STATUS_OK` even for rejected
/// patches: `applicable` carries the verdict and, when it is false, the
/// rejection reason is stored where `asf_last_error_message` reads it.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn asf_surface_classify(
    s: *const AsfSurface,
    out: *mut AsfClassification,
) -> AsfStatus {
    guard(|| {
        if s.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "surface or out is NULL");
        }
        let def = &unsafe { &*s }.def;
        let report = match classify_patch(def) {
            Ok(r) => r,
            Err(e) => return fail(AsfStatus::Eval, e.to_string()),
        };
        if let Some(reason) = &report.reason {
            set_error(reason.clone());
        }
        unsafe {
            *out = AsfClassification {
                k_min: report.k.min,
                k_max: report.k.max,
                h_min: report.h.min,
                h_max: report.h.max,
                k_minus_h2_min: report.k_minus_h2.min,
                k_minus_h2_max: report.k_minus_h2.max,
                isotropic: report.isotropic,
                applicable: report.method_applicable,
            };
        }
        AsfStatus::Ok
    })
}

/// Sample the surface positions over its grid into `out`, interleaved as
/// `x1, x2, x3` per node; `len` must equal `3 * nu * nv`.
///
/// # Safety
/// `s` must be valid and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn asf_surface_positions(
    s: *const AsfSurface,
    out: *mut f64,
    len: usize,
) -> AsfStatus {
    guard(|| {
        if s.is_null() {
            return fail(AsfStatus::InvalidArgument, "surface is NULL");
        }
        let def = &unsafe { &*s }.def;
        let positions = match def.sample_positions() {
            Ok(p) => p,
            Err(e) => return fail(AsfStatus::Eval, e.to_string()),
        };
        let mut flat = Vec::with_capacity(3 * positions.len());
        for p in positions {
            flat.extend_from_slice(&[p.x1, p.x2, p.x3]);
        }
        copy_out(&flat, out, len)
    })
}

/// Compute the asymptotic invariants of the surface over its grid.
///
/// # Safety
/// `s` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn asf_surface_invariants(
    s: *const AsfSurface,
    out: *mut *mut AsfInvariants,
) -> AsfStatus {
    guard(|| {
        if s.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "surface or out is NULL");
        }
        let def = &unsafe { &*s }.def;
        match invariant_field(def) {
            Ok(field) => {
                unsafe { *out = Box::into_raw(Box::new(AsfInvariants { field })) };
                AsfStatus::Ok
            }
            Err(e) => fail(invariant_status(&e), e.to_string()),
        }
    })
}

/// Release an invariants handle. NULL is ignored.
///
/// # Safety
/// `inv` must be NULL or a pointer obtained from `asf_surface_invariants`.
#[no_mangle]
pub unsafe extern "C" fn asf_invariants_free(inv: *mut AsfInvariants) {
    if !inv.is_null() {
        drop(unsafe { Box::from_raw(inv) });
    }
}

/// Grid dimensions of an invariant field.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn asf_invariants_dims(
    inv: *const AsfInvariants,
    nu: *mut usize,
    nv: *mut usize,
) -> AsfStatus {
    guard(|| {
        if inv.is_null() || nu.is_null() || nv.is_null() {
            return fail(AsfStatus::InvalidArgument, "invariants, nu or nv is NULL");
        }
        let spec = unsafe { &*inv }.field.spec;
        unsafe {
            *nu = spec.nu;
            *nv = spec.nv;
        }
        AsfStatus::Ok
    })
}

/// Copy one scalar component of the invariant field into `out`
/// (row-major, `v` outer); `len` must equal `nu * nv`.
///
/// # Safety
/// `inv` must be valid and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn asf_invariants_component(
    inv: *const AsfInvariants,
    which: AsfComponent,
    out: *mut f64,
    len: usize,
) -> AsfStatus {
    guard(|| {
        if inv.is_null() {
            return fail(AsfStatus::InvalidArgument, "invariants is NULL");
        }
        let field = &unsafe { &*inv }.field;
        let getter: fn(&asymsurf::invariants::InvariantPoint) -> f64 = match which {
            AsfComponent::A => |p| p.a,
            AsfComponent::Alpha => |p| p.alpha,
            AsfComponent::F => |p| p.f,
            AsfComponent::Gamma1 => |p| p.gamma1,
            AsfComponent::Gamma2 => |p| p.gamma2,
            AsfComponent::SqrtE => |p| p.sqrt_e,
            AsfComponent::SqrtMinusG => |p| p.sqrt_minus_g,
        };
        copy_out(&field.component(getter).data, out, len)
    })
}

/// Largest finite compatibility residuals of the invariant field.
///
/// # Safety
/// `inv` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn asf_invariants_residuals(
    inv: *const AsfInvariants,
    out: *mut AsfResiduals,
) -> AsfStatus {
    guard(|| {
        if inv.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "invariants or out is NULL");
        }
        let field = &unsafe { &*inv }.field;
        let (c1, c2) = codazzi_residual(field);
        let (s1, s2) = system_residual(field);
        unsafe {
            *out = AsfResiduals {
                gauss: gauss_residual(field).max_abs_finite(),
                codazzi_first: c1.max_abs_finite(),
                codazzi_second: c2.max_abs_finite(),
                system_first: s1.max_abs_finite(),
                system_second: s2.max_abs_finite(),
            };
        }
        AsfStatus::Ok
    })
}

/// Test whether the parameters are canonical at base `(u0, v0)`: both gauge
/// functions within `tol` of 1.
///
/// # Safety
/// `inv` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn asf_invariants_canonicity(
    inv: *const AsfInvariants,
    u0: f64,
    v0: f64,
    tol: f64,
    out: *mut AsfCanonicity,
) -> AsfStatus {
    guard(|| {
        if inv.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "invariants or out is NULL");
        }
        // Negated so a NaN tolerance is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(tol > 0.0) {
            return fail(AsfStatus::InvalidArgument, "tolerance must be positive");
        }
        let field = &unsafe { &*inv }.field;
        match is_canonical(field, (u0, v0), tol) {
            Ok(report) => {
                unsafe {
                    *out = AsfCanonicity {
                        canonical: report.canonical,
                        deviation: report.deviation,
                        cross_variation: report.cross_variation,
                    };
                }
                AsfStatus::Ok
            }
            Err(e @ CanonicalError::Grid(_)) => fail(AsfStatus::InvalidArgument, e.to_string()),
            Err(e) => fail(AsfStatus::Numeric, e.to_string()),
        }
    })
}

/// Rebuild a surface patch from curvature grids `k` and `h` (each `nu * nv`
/// doubles, row-major with `v` outer) over the given domain. The run starts
/// at grid point `(u0, v0)` and places it at `(x1, x2, x3)`.
///
/// # Safety
/// `k` and `h` must point to `nu * nv` readable doubles and `out` must be a
/// valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn asf_reconstruct_from_kh(
    k: *const f64,
    h: *const f64,
    nu: usize,
    nv: usize,
    u_min: f64,
    u_max: f64,
    v_min: f64,
    v_max: f64,
    branch: AsfBranch,
    u0: f64,
    v0: f64,
    x1: f64,
    x2: f64,
    x3: f64,
    out: *mut *mut AsfReconstruction,
) -> AsfStatus {
    guard(|| {
        if k.is_null() || h.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "k, h or out is NULL");
        }
        let spec = match grid_spec(u_min, u_max, v_min, v_max, nu, nv) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let len = spec.len();
        let k_field = ScalarField {
            spec,
            data: unsafe { slice::from_raw_parts(k, len) }.to_vec(),
        };
        let h_field = ScalarField {
            spec,
            data: unsafe { slice::from_raw_parts(h, len) }.to_vec(),
        };
        let branch = match branch {
            AsfBranch::Plus => Branch::Plus,
            AsfBranch::Minus => Branch::Minus,
        };
        match reconstruct_from_kh(&k_field, &h_field, branch, (u0, v0), MVec3::new(x1, x2, x3)) {
            Ok(run) => {
                unsafe { *out = Box::into_raw(Box::new(AsfReconstruction { run })) };
                AsfStatus::Ok
            }
            Err(e) => fail(reconstruct_status(&e), e.to_string()),
        }
    })
}

/// Release a reconstruction handle. NULL is ignored.
///
/// # Safety
/// `r` must be NULL or a pointer obtained from `asf_reconstruct_from_kh`.
#[no_mangle]
pub unsafe extern "C" fn asf_reconstruction_free(r: *mut AsfReconstruction) {
    if !r.is_null() {
        drop(unsafe { Box::from_raw(r) });
    }
}

/// Copy the reconstructed positions into `out`, interleaved as
/// `x1, x2, x3` per node; `len` must equal `3 * nu * nv`.
///
/// # Safety
/// `r` must be valid and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn asf_reconstruction_positions(
    r: *const AsfReconstruction,
    out: *mut f64,
    len: usize,
) -> AsfStatus {
    guard(|| {
        if r.is_null() {
            return fail(AsfStatus::InvalidArgument, "reconstruction is NULL");
        }
        let run = &unsafe { &*r }.run;
        let mut flat = Vec::with_capacity(3 * run.patch.positions.len());
        for p in &run.patch.positions {
            flat.extend_from_slice(&[p.x1, p.x2, p.x3]);
        }
        copy_out(&flat, out, len)
    })
}

/// Diagnostics recorded by a reconstruction run.
///
/// # Safety
/// `r` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn asf_reconstruction_diagnostics(
    r: *const AsfReconstruction,
    out: *mut AsfDiagnostics,
) -> AsfStatus {
    guard(|| {
        if r.is_null() || out.is_null() {
            return fail(AsfStatus::InvalidArgument, "reconstruction or out is NULL");
        }
        let d = &unsafe { &*r }.run.diagnostics;
        unsafe {
            *out = AsfDiagnostics {
                phi_psi_residual: d.phi_psi_residual,
                integrability: d.integrability,
                gauss_residual: d.gauss_residual,
                codazzi_phi_residual: d.codazzi_phi_residual,
                codazzi_psi_residual: d.codazzi_psi_residual,
                masked_nodes: d.masked_nodes,
                gram_drift: d.gram_drift,
                closure: d.closure,
            };
        }
        AsfStatus::Ok
    })
}

/// March the hyperbolic equation `omega_uv + cosh(omega) = 0` from
/// characteristic data `bottom` (`nu` doubles on `v = v_min`) and `left`
/// (`nv` doubles on `u = u_min`). Writes the `nu * nv` solution grid to
/// `omega_out` and, when non-NULL, the largest cell defect of the marching
/// scheme to `scheme_residual_out`.
///
/// # Safety
/// `bottom` and `left` must point to `nu` resp. `nv` readable doubles and
/// `omega_out` to `len` writable doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn asf_solve_cosh_gordon(
    bottom: *const f64,
    nu: usize,
    left: *const f64,
    nv: usize,
    u_min: f64,
    u_max: f64,
    v_min: f64,
    v_max: f64,
    omega_out: *mut f64,
    len: usize,
    scheme_residual_out: *mut f64,
) -> AsfStatus {
    guard(|| {
        if bottom.is_null() || left.is_null() {
            return fail(AsfStatus::InvalidArgument, "bottom or left is NULL");
        }
        let spec = match grid_spec(u_min, u_max, v_min, v_max, nu, nv) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let bottom = unsafe { slice::from_raw_parts(bottom, nu) }.to_vec();
        let left = unsafe { slice::from_raw_parts(left, nv) }.to_vec();
        let problem = match GoursatProblem::from_samples(spec, bottom, left) {
            Ok(p) => p,
            Err(e) => return fail(pde_status(&e), e.to_string()),
        };
        match solve_cosh_gordon(&problem) {
            Ok(sol) => {
                let status = copy_out(&sol.omega.data, omega_out, len);
                if status == AsfStatus::Ok && !scheme_residual_out.is_null() {
                    unsafe { *scheme_residual_out = sol.scheme_residual };
                }
                status
            }
            Err(e) => fail(pde_status(&e), e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn cubic_surface() -> *mut AsfSurface {
        let x = cstr("u^3/6 + u*v^2/2 - u/2");
        let y = cstr("u*v");
        let z = cstr("u^2*v/2 + v^3/6 + v/2");
        let mut out = ptr::null_mut();
        let status = unsafe {
            asf_surface_new(
                x.as_ptr(),
                y.as_ptr(),
                z.as_ptr(),
                -0.3,
                0.3,
                -0.3,
                0.3,
                41,
                41,
                0.0,
                0.0,
                &mut out,
            )
        };
        assert_eq!(status, AsfStatus::Ok);
        assert!(!out.is_null());
        out
    }

    fn message() -> String {
        unsafe { CStr::from_ptr(asf_last_error_message()) }
            .to_str()
            .unwrap()
            .to_owned()
    }

    #[test]
    fn version_is_a_static_string() {
        let v = unsafe { CStr::from_ptr(asf_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_arguments_are_rejected_with_a_message() {
        let mut out = ptr::null_mut();
        let status = unsafe {
            asf_surface_new(
                ptr::null(),
                ptr::null(),
                ptr::null(),
                0.0,
                1.0,
                0.0,
                1.0,
                11,
                11,
                0.0,
                0.0,
                &mut out,
            )
        };
        assert_eq!(status, AsfStatus::InvalidArgument);
        assert_eq!(message(), "x is NULL");
    }

    #[test]
    fn parse_errors_carry_the_coordinate_name() {
        let x = cstr("u +");
        let y = cstr("v");
        let z = cstr("u*v");
        let mut out = ptr::null_mut();
        let status = unsafe {
            asf_surface_new(
                x.as_ptr(),
                y.as_ptr(),
                z.as_ptr(),
                0.0,
                1.0,
                0.0,
                1.0,
                11,
                11,
                0.5,
                0.5,
                &mut out,
            )
        };
        assert_eq!(status, AsfStatus::Parse);
        assert!(message().starts_with("coordinate x:"), "{}", message());
    }

    #[test]
    fn forms_and_classification_match_the_cubic() {
        let s = cubic_surface();
        let mut forms = AsfForms::default();
        let status = unsafe { asf_surface_forms_at(s, 0.0, 0.0, &mut forms) };
        assert_eq!(status, AsfStatus::Ok);
        assert!((forms.e - 0.25).abs() < 1e-12);
        assert!((forms.g + 0.25).abs() < 1e-12);
        assert!((forms.k - 16.0).abs() < 1e-9);
        assert!(forms.h.abs() < 1e-10);

        let mut class = AsfClassification::default();
        let status = unsafe { asf_surface_classify(s, &mut class) };
        assert_eq!(status, AsfStatus::Ok);
        assert!(class.applicable);
        assert!(class.k_min > 0.0);
        assert!(class.k_minus_h2_min > 0.0);
        unsafe { asf_surface_free(s) };
    }

    #[test]
    fn rejected_patches_report_their_reason() {
        let x = cstr("u");
        let y = cstr("cos(u)*cosh(v)");
        let z = cstr("cos(u)*sinh(v)");
        let mut out = ptr::null_mut();
        let status = unsafe {
            asf_surface_new(
                x.as_ptr(),
                y.as_ptr(),
                z.as_ptr(),
                0.1,
                0.7,
                -0.5,
                0.5,
                21,
                21,
                0.4,
                0.0,
                &mut out,
            )
        };
        assert_eq!(status, AsfStatus::Ok);
        let mut class = AsfClassification::default();
        assert_eq!(unsafe { asf_surface_classify(out, &mut class) }, AsfStatus::Ok);
        assert!(!class.applicable);
        assert!(message().contains("K - H^2"), "{}", message());

        let mut inv = ptr::null_mut();
        let status = unsafe { asf_surface_invariants(out, &mut inv) };
        assert_eq!(status, AsfStatus::NotApplicable);
        unsafe { asf_surface_free(out) };
    }

    #[test]
    fn invariants_round_trip_through_buffers() {
        let s = cubic_surface();
        let mut inv = ptr::null_mut();
        assert_eq!(unsafe { asf_surface_invariants(s, &mut inv) }, AsfStatus::Ok);

        let (mut nu, mut nv) = (0usize, 0usize);
        assert_eq!(unsafe { asf_invariants_dims(inv, &mut nu, &mut nv) }, AsfStatus::Ok);
        assert_eq!((nu, nv), (41, 41));

        let mut a = vec![0.0; nu * nv];
        let status = unsafe { asf_invariants_component(inv, AsfComponent::A, a.as_mut_ptr(), a.len()) };
        assert_eq!(status, AsfStatus::Ok);
        assert!(a.iter().all(|x| x.abs() < 1e-12));

        let status =
            unsafe { asf_invariants_component(inv, AsfComponent::A, a.as_mut_ptr(), a.len() - 1) };
        assert_eq!(status, AsfStatus::InvalidArgument);

        let mut res = AsfResiduals::default();
        assert_eq!(unsafe { asf_invariants_residuals(inv, &mut res) }, AsfStatus::Ok);
        assert!(res.gauss < 5e-2);

        let mut canon = AsfCanonicity::default();
        let status = unsafe { asf_invariants_canonicity(inv, 0.0, 0.0, 1e-6, &mut canon) };
        assert_eq!(status, AsfStatus::Ok);
        assert!(canon.canonical);

        unsafe { asf_invariants_free(inv) };
        unsafe { asf_surface_free(s) };
    }

    #[test]
    fn reconstruction_round_trips_the_cubic_positions() {
        let spec = GridSpec {
            u_min: -0.2,
            u_max: 0.2,
            v_min: -0.2,
            v_max: 0.2,
            nu: 41,
            nv: 41,
        };
        let k: Vec<f64> = (0..spec.nv)
            .flat_map(|j| {
                (0..spec.nu).map(move |i| {
                    let q = 1.0 - spec.u_at(i).powi(2) + spec.v_at(j).powi(2);
                    16.0 / q.powi(4)
                })
            })
            .collect();
        let h = vec![0.0; spec.len()];
        let mut run = ptr::null_mut();
        let status = unsafe {
            asf_reconstruct_from_kh(
                k.as_ptr(),
                h.as_ptr(),
                spec.nu,
                spec.nv,
                spec.u_min,
                spec.u_max,
                spec.v_min,
                spec.v_max,
                AsfBranch::Plus,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                &mut run,
            )
        };
        assert_eq!(status, AsfStatus::Ok, "{}", message());

        let mut diag = AsfDiagnostics::default();
        assert_eq!(unsafe { asf_reconstruction_diagnostics(run, &mut diag) }, AsfStatus::Ok);
        assert!(diag.closure < 1e-4, "closure {}", diag.closure);

        let mut flat = vec![0.0; 3 * spec.len()];
        let status =
            unsafe { asf_reconstruction_positions(run, flat.as_mut_ptr(), flat.len()) };
        assert_eq!(status, AsfStatus::Ok);
        assert!(flat.iter().all(|x| x.is_finite()));
        unsafe { asf_reconstruction_free(run) };
    }

    #[test]
    fn incompatible_curvatures_fail_numerically() {
        let n = 11usize;
        let k = vec![1.0; n * n];
        let h = vec![0.0; n * n];
        let mut run = ptr::null_mut();
        let status = unsafe {
            asf_reconstruct_from_kh(
                k.as_ptr(),
                h.as_ptr(),
                n,
                n,
                0.0,
                0.5,
                0.0,
                0.5,
                AsfBranch::Plus,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
                &mut run,
            )
        };
        assert_eq!(status, AsfStatus::Numeric);
        assert!(message().contains("compatibility conditions"), "{}", message());
    }

    #[test]
    fn cosh_gordon_marches_zero_data() {
        let n = 26usize;
        let zeros = vec![0.0; n];
        let mut omega = vec![f64::NAN; n * n];
        let mut scheme = f64::NAN;
        let status = unsafe {
            asf_solve_cosh_gordon(
                zeros.as_ptr(),
                n,
                zeros.as_ptr(),
                n,
                0.0,
                0.5,
                0.0,
                0.5,
                omega.as_mut_ptr(),
                omega.len(),
                &mut scheme,
            )
        };
        assert_eq!(status, AsfStatus::Ok);
        assert!(scheme < 1e-6);
        assert_eq!(omega[0], 0.0);
        assert!(omega.iter().all(|x| x.is_finite()));
        // interior values must dip negative under the forcing
        assert!(omega[n * n - 1] < -0.2);
    }

    #[test]
    fn free_functions_accept_null() {
        unsafe {
            asf_surface_free(ptr::null_mut());
            asf_invariants_free(ptr::null_mut());
            asf_reconstruction_free(ptr::null_mut());
        }
    }
}
