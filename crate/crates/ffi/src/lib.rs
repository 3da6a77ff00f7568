//! C ABI over `varexp`.
//!
//! Grids are opaque handles created by `vx_grid_*` constructors and released
//! with [`vx_grid_free`]. Every fallible call returns a [`VxStatus`]; the
//! message of the last failure on the calling thread is available through
//! [`vx_last_error`]. Panics are caught at the boundary and reported as
//! [`VxStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use varexp::asymptotics::{direct_mu, MuOptions};
use varexp::config::DomainConfig;
use varexp::distance::distance_field;
use varexp::exponents::ExponentField;
use varexp::geometry::{DomainSpec, Shape};
use varexp::grid::{ScalarField, TriGrid};
use varexp::modular::{gradient_norm, luxemburg_norm, NormVariant};
use varexp::rayleigh::{minimize_quotient, MinimizeOptions};
use varexp::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    NonAdmissible = 4,
    ZeroField = 5,
    NonConvergence = 6,
    Io = 7,
    Panic = 8,
}

/// Norm variant selector: `0` weighted (`dx/p`), `1` classical.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VxNormVariant {
    Weighted = 0,
    Classical = 1,
}

impl From<VxNormVariant> for NormVariant {
    fn from(v: VxNormVariant) -> Self {
        match v {
            VxNormVariant::Weighted => NormVariant::Weighted,
            VxNormVariant::Classical => NormVariant::Classical,
        }
    }
}

/// Opaque triangulated domain.
pub struct VxGrid {
    grid: TriGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VxStatus {
    match e {
        Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Json(_) | Error::Config(_) => VxStatus::Parse,
        Error::NonAdmissibleExponent(_) => VxStatus::NonAdmissible,
        Error::ZeroField => VxStatus::ZeroField,
        Error::Io(_) => VxStatus::Io,
        _ => VxStatus::InvalidArgument,
    }
}

struct Fail(VxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

/// Runs `f`, records any failure and converts it into a status.
fn guard(f: impl FnOnce() -> FfiResult<VxStatus>) -> VxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            VxStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(VxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn grid_ref<'a>(g: *const VxGrid) -> FfiResult<&'a TriGrid> {
    g.as_ref().map(|g| &g.grid).ok_or_else(|| null("grid"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> FfiResult<&'a str> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(VxStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn field_arg(grid: &TriGrid, values: *const f64, len: usize) -> FfiResult<ScalarField> {
    if values.is_null() {
        return Err(null("values"));
    }
    let v = std::slice::from_raw_parts(values, len).to_vec();
    Ok(ScalarField::new(grid, v, false)?)
}

unsafe fn out_slice<'a>(grid: &TriGrid, out: *mut f64, len: usize) -> FfiResult<&'a mut [f64]> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len != grid.node_count() {
        return Err(Error::Dimension { expected: grid.node_count(), got: len }.into());
    }
    Ok(std::slice::from_raw_parts_mut(out, len))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

fn publish(spec: DomainSpec, out: *mut *mut VxGrid) -> FfiResult<VxStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    let grid = TriGrid::build(&spec)?;
    // SAFETY: checked non-null above
    unsafe { *out = Box::into_raw(Box::new(VxGrid { grid })) };
    Ok(VxStatus::Ok)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a grid from a flat JSON domain such as
/// `{"shape": "disk", "r": 1, "n": 64}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_from_json(json: *const c_char, out: *mut *mut VxGrid) -> VxStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let cfg: DomainConfig = serde_json::from_str(text).map_err(Error::from)?;
        publish(cfg.to_spec()?, out)
    })
}

/// Grid on the rectangle `[0, w] x [0, h]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_rectangle(w: f64, h: f64, n: u32, out: *mut *mut VxGrid) -> VxStatus {
    guard(|| publish(DomainSpec::new(Shape::Rectangle { w, h }, n)?, out))
}

/// Grid on the disk of radius `r` centred at the origin.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_disk(r: f64, n: u32, out: *mut *mut VxGrid) -> VxStatus {
    guard(|| publish(DomainSpec::new(Shape::Disk { r }, n)?, out))
}

/// Releases a grid. Null is ignored.
///
/// # Safety
/// `grid` must come from a `vx_grid_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_free(grid: *mut VxGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of lattice nodes (the length of every field buffer); 0 for null.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_node_count(grid: *const VxGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.grid.node_count())
}

/// Copies node coordinates as interleaved `x, y` pairs (`2 * node_count` values).
///
/// # Safety
/// `grid` must be a live handle and `xy` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_grid_nodes(grid: *const VxGrid, xy: *mut f64, len: usize) -> VxStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        if xy.is_null() {
            return Err(null("xy"));
        }
        if len != 2 * g.node_count() {
            return Err(Error::Dimension { expected: 2 * g.node_count(), got: len }.into());
        }
        let out = std::slice::from_raw_parts_mut(xy, len);
        for (k, p) in g.nodes.iter().enumerate() {
            out[2 * k] = p[0];
            out[2 * k + 1] = p[1];
        }
        Ok(VxStatus::Ok)
    })
}

/// Luxemburg norm of the nodal field `values` for the exponent `p_expr`.
///
/// # Safety
/// `grid` must be a live handle, `values` hold `len` doubles, `p_expr` be
/// NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn vx_luxemburg_norm(
    grid: *const VxGrid,
    values: *const f64,
    len: usize,
    p_expr: *const c_char,
    variant: VxNormVariant,
    out: *mut f64,
) -> VxStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        let u = field_arg(g, values, len)?;
        let p = ExponentField::parse_and_sample(str_arg(p_expr, "p_expr")?, g, 1)?;
        write_out(out, luxemburg_norm(g, &u, &p, variant.into()), "out")?;
        Ok(VxStatus::Ok)
    })
}

/// Luxemburg norm of the gradient of the nodal field `values`.
///
/// # Safety
/// Same contract as [`vx_luxemburg_norm`].
#[no_mangle]
pub unsafe extern "C" fn vx_gradient_norm(
    grid: *const VxGrid,
    values: *const f64,
    len: usize,
    p_expr: *const c_char,
    variant: VxNormVariant,
    out: *mut f64,
) -> VxStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        let u = field_arg(g, values, len)?;
        let p = ExponentField::parse_and_sample(str_arg(p_expr, "p_expr")?, g, 1)?;
        write_out(out, gradient_norm(g, &u, &p, variant.into()), "out")?;
        Ok(VxStatus::Ok)
    })
}

/// Boundary distance at the nodes and `Λ_∞ = 1/‖d‖_∞`.
///
/// # Safety
/// `grid` must be a live handle, `d_out` hold `len` doubles and
/// `lambda_inf` be valid or null.
#[no_mangle]
pub unsafe extern "C" fn vx_distance(grid: *const VxGrid, d_out: *mut f64, len: usize, lambda_inf: *mut f64) -> VxStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        let out = out_slice(g, d_out, len)?;
        let d = distance_field(g);
        out.copy_from_slice(&d.d.values);
        if !lambda_inf.is_null() {
            *lambda_inf = d.lambda_inf;
        }
        Ok(VxStatus::Ok)
    })
}

/// First eigenvalue of `‖∇u‖_{p(x)}/‖u‖_{q(x)}` with default solver settings.
/// The minimizer (sup norm 1) goes to `u_out`, which may be null. Returns
/// `NonConvergence` with the outputs filled in if tolerances were not met.
///
/// # Safety
/// `grid` must be a live handle, the expressions NUL-terminated, `lambda`
/// valid and `u_out` null or holding `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_minimize(
    grid: *const VxGrid,
    p_expr: *const c_char,
    q_expr: *const c_char,
    lambda: *mut f64,
    u_out: *mut f64,
    len: usize,
) -> VxStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        let p = ExponentField::parse_and_sample(str_arg(p_expr, "p_expr")?, g, 1)?;
        let q = ExponentField::parse_and_sample(str_arg(q_expr, "q_expr")?, g, 1)?;
        if lambda.is_null() {
            return Err(null("lambda"));
        }
        let r = minimize_quotient(g, &p, &q, &MinimizeOptions::default())?;
        if !u_out.is_null() {
            out_slice(g, u_out, len)?.copy_from_slice(&r.minimizer.values);
        }
        *lambda = r.lambda;
        Ok(finish(r.converged, r.iterations))
    })
}

/// `μ_l = min ‖∇u‖_{l·p(x)}/‖u‖_∞`; the extremal goes to `w_out` (may be null).
///
/// # Safety
/// Same contract as [`vx_minimize`].
#[no_mangle]
pub unsafe extern "C" fn vx_direct_mu(
    grid: *const VxGrid,
    p_expr: *const c_char,
    l: u32,
    mu: *mut f64,
    w_out: *mut f64,
    len: usize,
) -> VxStatus {
    guard(|| {
        let g = grid_ref(grid)?;
        let lp = ExponentField::parse_and_sample(str_arg(p_expr, "p_expr")?, g, l)?;
        if mu.is_null() {
            return Err(null("mu"));
        }
        let r = direct_mu(g, &lp, &MuOptions::default())?;
        if !w_out.is_null() {
            out_slice(g, w_out, len)?.copy_from_slice(&r.w.values);
        }
        *mu = r.mu;
        Ok(finish(r.converged, r.iterations))
    })
}

fn finish(converged: bool, iterations: usize) -> VxStatus {
    if converged {
        VxStatus::Ok
    } else {
        set_error(format!("stopped after {iterations} iterations without meeting the tolerances"));
        VxStatus::NonConvergence
    }
}
