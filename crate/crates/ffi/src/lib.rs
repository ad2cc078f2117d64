//! C ABI over the `fbg-skin` crate.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every call returns an [`FbgStatus`];
//! on failure [`fbg_last_error_message`] describes the error for the calling
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fbg_skin::geometry::{build_default_layout, SkinLayout, SurfacePoint, SENSOR_COUNT};
use fbg_skin::pipeline::{ContactEstimate, PipelineModel};
use fbg_skin::psychometrics::{fit_sigmoid, threshold_at, SigmoidFit};
use fbg_skin::simulator::{sensor_response, Contact, FieldParams};
use fbg_skin::Error;

/// Result code of every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbgStatus {
    Ok = 0,
    InvalidArgument = 1,
    OutOfDomain = 2,
    ShapeMismatch = 3,
    Io = 4,
    Parse = 5,
    NullPointer = 6,
    Panic = 7,
    Other = 8,
}

/// Opaque skin layout.
pub struct FbgLayout(SkinLayout);

/// Opaque receptive-field parameters.
pub struct FbgParams(FieldParams);

/// Opaque trained pipeline.
pub struct FbgModel(PipelineModel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> FbgStatus {
    match err {
        Error::InvalidArgument(_) | Error::Validation(_) | Error::Config(_) => FbgStatus::InvalidArgument,
        Error::OutOfDomain(_) => FbgStatus::OutOfDomain,
        Error::Shape(_) => FbgStatus::ShapeMismatch,
        Error::Io { .. } => FbgStatus::Io,
        Error::Parse { .. } | Error::Checkpoint(_) => FbgStatus::Parse,
        _ => FbgStatus::Other,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus a message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FbgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FbgStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            FbgStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            FbgStatus::InvalidArgument
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FbgStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fbg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Number of gratings in every layout.
#[no_mangle]
pub extern "C" fn fbg_sensor_count() -> usize {
    SENSOR_COUNT
}

/// Creates the default 16-grating layout.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fbg_layout_new_default(out: *mut *mut FbgLayout) -> FbgStatus {
    guard(|| put(out, Box::into_raw(Box::new(FbgLayout(build_default_layout()))), "out"))
}

/// # Safety
/// `layout` must be null or a handle from [`fbg_layout_new_default`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fbg_layout_free(layout: *mut FbgLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Creates the calibrated default field parameters, optionally with the
/// dual-lobe preset for `layout` (pass a null layout for single lobes).
///
/// # Safety
/// `layout` must be null or a live layout handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fbg_params_new_default(
    layout: *const FbgLayout,
    dual_lobes: bool,
    out: *mut *mut FbgParams,
) -> FbgStatus {
    guard(|| {
        let mut params = FieldParams::default();
        if dual_lobes {
            params = params.with_dual_lobe_preset(&get(layout, "layout")?.0);
        }
        put(out, Box::into_raw(Box::new(FbgParams(params))), "out")
    })
}

/// # Safety
/// `params` must be null or a live params handle.
#[no_mangle]
pub unsafe extern "C" fn fbg_params_free(params: *mut FbgParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Noiseless wavelength shifts (nm) for a contact of `force_n` at `(x_mm, y_mm)`.
/// `out_shifts` receives `fbg_sensor_count()` values; `len` must be at least that.
///
/// # Safety
/// Handles must be live; `out_shifts` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fbg_sensor_response(
    layout: *const FbgLayout,
    params: *const FbgParams,
    x_mm: f64,
    y_mm: f64,
    force_n: f64,
    out_shifts: *mut f64,
    len: usize,
) -> FbgStatus {
    guard(|| {
        let layout = get(layout, "layout")?;
        let params = get(params, "params")?;
        if out_shifts.is_null() {
            return Err(Failure::Null("out_shifts"));
        }
        if len < SENSOR_COUNT {
            return Err(Failure::Core(Error::Shape(format!("output holds {len} values, need {SENSOR_COUNT}"))));
        }
        let contact = Contact { point: SurfacePoint::new(x_mm, y_mm), force: force_n };
        let shifts = sensor_response(&layout.0, &params.0, contact)?;
        std::ptr::copy_nonoverlapping(shifts.as_ptr(), out_shifts, SENSOR_COUNT);
        Ok(())
    })
}

/// Loads a model bundle directory written by `fbg-skin train`.
///
/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fbg_model_load(dir: *const c_char, out: *mut *mut FbgModel) -> FbgStatus {
    guard(|| {
        if dir.is_null() {
            return Err(Failure::Null("dir"));
        }
        let dir = CStr::from_ptr(dir).to_str().map_err(|_| Failure::Arg("model path is not valid UTF-8".into()))?;
        let model = PipelineModel::load(Path::new(dir))?;
        put(out, Box::into_raw(Box::new(FbgModel(model))), "out")
    })
}

/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn fbg_model_free(model: *mut FbgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Window length (frames) the model expects.
///
/// # Safety
/// `model` must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fbg_model_window(model: *const FbgModel, out: *mut usize) -> FbgStatus {
    guard(|| put(out, get(model, "model")?.0.window, "out"))
}

/// Runs the gated pipeline on `frames` rows of 16 shifts (nm), oldest first;
/// `frames` must equal the model window. `out_contact` is 0 for no contact,
/// 1 for contact; force and position are written only on contact.
///
/// # Safety
/// `window` must point to `frames * 16` doubles; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbg_model_infer(
    model: *const FbgModel,
    window: *const f64,
    frames: usize,
    out_contact: *mut i32,
    out_force_n: *mut f64,
    out_x_mm: *mut f64,
    out_y_mm: *mut f64,
) -> FbgStatus {
    guard(|| {
        let model = get(model, "model")?;
        if window.is_null() {
            return Err(Failure::Null("window"));
        }
        if out_contact.is_null() || out_force_n.is_null() || out_x_mm.is_null() || out_y_mm.is_null() {
            return Err(Failure::Null("output"));
        }
        let data = std::slice::from_raw_parts(window, frames * SENSOR_COUNT);
        let rows: Vec<Vec<f64>> = data.chunks_exact(SENSOR_COUNT).map(<[f64]>::to_vec).collect();
        match model.0.infer(&rows)? {
            ContactEstimate::NoContact => *out_contact = 0,
            ContactEstimate::Contact { force, point } => {
                *out_contact = 1;
                *out_force_n = force;
                *out_x_mm = point.x;
                *out_y_mm = point.y;
            }
        }
        Ok(())
    })
}

/// Least-squares sigmoid `1 / (1 + exp(-a (x - b)))` through `n` (force, rate) pairs.
///
/// # Safety
/// `forces_mn` and `rates` must point to `n` doubles; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbg_fit_sigmoid(
    forces_mn: *const f64,
    rates: *const f64,
    n: usize,
    out_a: *mut f64,
    out_b: *mut f64,
    out_residual: *mut f64,
) -> FbgStatus {
    guard(|| {
        if forces_mn.is_null() || rates.is_null() {
            return Err(Failure::Null("input"));
        }
        let fit = fit_sigmoid(std::slice::from_raw_parts(forces_mn, n), std::slice::from_raw_parts(rates, n))?;
        put(out_a, fit.a, "out_a")?;
        put(out_b, fit.b, "out_b")?;
        put(out_residual, fit.residual, "out_residual")
    })
}

/// Force (mN) at which the sigmoid `(a, b)` reaches probability `p`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fbg_threshold_at(a: f64, b: f64, p: f64, out: *mut f64) -> FbgStatus {
    guard(|| {
        let fit = SigmoidFit { a, b, residual: 0.0, converged: true, identifiable: a > 0.0, log_axis: false };
        put(out, threshold_at(&fit, p)?, "out")
    })
}
