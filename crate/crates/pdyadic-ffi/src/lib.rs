//! C ABI for the pdyadic library.
//!
//! All handles are opaque; every function returns a `PdStatus` and writes its
//! result through out-pointers. On any non-`Ok` status the thread-local error
//! message is updated and can be read with `pd_last_error_message` (valid
//! until the next failing call on the same thread).

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use pdyadic::{
    operator_constants, weighted_norm, CellVector, DyadicInterval, Error, KernelCoeffs, Weight,
    WeightPair,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Status codes shared with the generated header.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    PdOk = 0,
    PdNullPointer = 1,
    PdInvalidArgument = 2,
    PdOutOfRange = 3,
    PdSizeViolation = 4,
    PdNoConvergence = 5,
    PdIoError = 6,
    PdInternalError = 7,
}

/// Opaque kernel-coefficient table.
pub struct PdKernel(KernelCoeffs);

/// Opaque weight (positive cell values plus cached averages).
pub struct PdWeight(Weight);

/// Opaque cell-value vector.
pub struct PdCellVector(CellVector);

/// Operator constants, plain-old-data for the C side.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdOperatorConstants {
    pub size_sum: f64,
    pub size_plus: f64,
    pub size_minus: f64,
    pub bmo_t1: f64,
    pub bmo_t1star: f64,
    pub testing: f64,
    pub q: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = sanitized);
}

fn status_of(err: &Error) -> PdStatus {
    match err {
        Error::IntervalOutOfRange { .. } | Error::NotInternal(_) | Error::DepthGuard { .. } => {
            PdStatus::PdOutOfRange
        }
        Error::DepthMismatch { .. } | Error::InvalidValue(_) | Error::Config(_) => {
            PdStatus::PdInvalidArgument
        }
        Error::SizeViolation { .. } => PdStatus::PdSizeViolation,
        Error::NoConvergence { .. } => PdStatus::PdNoConvergence,
        Error::Io(_) => PdStatus::PdIoError,
        Error::Json(_) => PdStatus::PdInvalidArgument,
    }
}

fn fail(err: &Error) -> PdStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn null_arg(name: &str) -> PdStatus {
    set_error(&format!("null pointer argument: {name}"));
    PdStatus::PdNullPointer
}

/// Run `f`, converting panics into `PdInternalError` instead of unwinding
/// across the FFI boundary.
fn guarded(f: impl FnOnce() -> PdStatus) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            PdStatus::PdInternalError
        }
    }
}

/// Last error message for this thread; empty string if none. The pointer is
/// owned by the library and must not be freed.
#[no_mangle]
pub extern "C" fn pd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

// ---- kernels ---------------------------------------------------------------

#[no_mangle]
pub extern "C" fn pd_kernel_zeros(depth: u32, out: *mut *mut PdKernel) -> PdStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match KernelCoeffs::zeros(depth) {
            Ok(k) => {
                unsafe { *out = Box::into_raw(Box::new(PdKernel(k))) };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Kernel with entries uniform in `[-1/|I|, 1/|I|]`, deterministic per seed.
#[no_mangle]
pub extern "C" fn pd_kernel_random_uniform(
    depth: u32,
    seed: u64,
    out: *mut *mut PdKernel,
) -> PdStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match KernelCoeffs::random_uniform(depth, &mut rng) {
            Ok(k) => {
                unsafe { *out = Box::into_raw(Box::new(PdKernel(k))) };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn pd_kernel_from_json(
    json: *const c_char,
    allow_unnormalized: bool,
    out: *mut *mut PdKernel,
) -> PdStatus {
    guarded(|| {
        if json.is_null() {
            return null_arg("json");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let s = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("kernel JSON is not valid UTF-8");
                return PdStatus::PdInvalidArgument;
            }
        };
        match KernelCoeffs::from_json(s, allow_unnormalized) {
            Ok(k) => {
                unsafe { *out = Box::into_raw(Box::new(PdKernel(k))) };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Serialize to JSON; free the result with `pd_string_free`.
#[no_mangle]
pub extern "C" fn pd_kernel_to_json(
    kernel: *const PdKernel,
    out: *mut *mut c_char,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let json = unsafe { &(*kernel).0 }.to_json();
        match CString::new(json) {
            Ok(c) => {
                unsafe { *out = c.into_raw() };
                PdStatus::PdOk
            }
            Err(_) => {
                set_error("serialized JSON contained an interior NUL");
                PdStatus::PdInternalError
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn pd_kernel_set(
    kernel: *mut PdKernel,
    level: u32,
    index: usize,
    kplus: f64,
    kminus: f64,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        let interval = DyadicInterval::new(level, index);
        match unsafe { &mut (*kernel).0 }.set(&interval, kplus, kminus) {
            Ok(()) => PdStatus::PdOk,
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn pd_kernel_depth(kernel: *const PdKernel, out: *mut u32) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = (*kernel).0.depth() };
        PdStatus::PdOk
    })
}

#[no_mangle]
pub extern "C" fn pd_kernel_apply(
    kernel: *const PdKernel,
    input: *const PdCellVector,
    out: *mut *mut PdCellVector,
) -> PdStatus {
    kernel_apply_impl(kernel, input, out, false)
}

#[no_mangle]
pub extern "C" fn pd_kernel_apply_adjoint(
    kernel: *const PdKernel,
    input: *const PdCellVector,
    out: *mut *mut PdCellVector,
) -> PdStatus {
    kernel_apply_impl(kernel, input, out, true)
}

fn kernel_apply_impl(
    kernel: *const PdKernel,
    input: *const PdCellVector,
    out: *mut *mut PdCellVector,
    adjoint: bool,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if input.is_null() {
            return null_arg("input");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let k = unsafe { &(*kernel).0 };
        let f = unsafe { &(*input).0 };
        let result = if adjoint { k.apply_adjoint(f) } else { k.apply(f) };
        match result {
            Ok(v) => {
                unsafe { *out = Box::into_raw(Box::new(PdCellVector(v))) };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Max-norm residual of the four-operator decomposition identity on `input`.
#[no_mangle]
pub extern "C" fn pd_kernel_decomposition_residual(
    kernel: *const PdKernel,
    input: *const PdCellVector,
    out: *mut f64,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if input.is_null() {
            return null_arg("input");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match unsafe { &(*kernel).0 }.decomposition_residual(unsafe { &(*input).0 }) {
            Ok(r) => {
                unsafe { *out = r };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn pd_kernel_constants(
    kernel: *const PdKernel,
    out: *mut PdOperatorConstants,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let c = operator_constants(unsafe { &(*kernel).0 });
        unsafe {
            *out = PdOperatorConstants {
                size_sum: c.size_sum,
                size_plus: c.size_plus,
                size_minus: c.size_minus,
                bmo_t1: c.bmo_t1,
                bmo_t1star: c.bmo_t1star,
                testing: c.testing,
                q: c.q,
            };
        }
        PdStatus::PdOk
    })
}

#[no_mangle]
pub extern "C" fn pd_kernel_free(kernel: *mut PdKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

// ---- cell vectors ----------------------------------------------------------

/// Build from `1 << depth` cell values.
#[no_mangle]
pub extern "C" fn pd_cellvector_new(
    depth: u32,
    values: *const f64,
    len: usize,
    out: *mut *mut PdCellVector,
) -> PdStatus {
    guarded(|| {
        if values.is_null() {
            return null_arg("values");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let slice = unsafe { std::slice::from_raw_parts(values, len) };
        match CellVector::new(depth, slice.to_vec()) {
            Ok(v) => {
                unsafe { *out = Box::into_raw(Box::new(PdCellVector(v))) };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn pd_cellvector_len(v: *const PdCellVector, out: *mut usize) -> PdStatus {
    guarded(|| {
        if v.is_null() {
            return null_arg("v");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = (*v).0.values().len() };
        PdStatus::PdOk
    })
}

/// Copy the cell values into a caller-provided buffer of length `len`.
#[no_mangle]
pub extern "C" fn pd_cellvector_copy(
    v: *const PdCellVector,
    buffer: *mut f64,
    len: usize,
) -> PdStatus {
    guarded(|| {
        if v.is_null() {
            return null_arg("v");
        }
        if buffer.is_null() {
            return null_arg("buffer");
        }
        let values = unsafe { (*v).0.values() };
        if len != values.len() {
            set_error(&format!(
                "buffer length {len} does not match cell count {}",
                values.len()
            ));
            return PdStatus::PdInvalidArgument;
        }
        unsafe { std::slice::from_raw_parts_mut(buffer, len) }.copy_from_slice(values);
        PdStatus::PdOk
    })
}

#[no_mangle]
pub extern "C" fn pd_cellvector_free(v: *mut PdCellVector) {
    if !v.is_null() {
        drop(unsafe { Box::from_raw(v) });
    }
}

// ---- weights ---------------------------------------------------------------

/// Weight from `1 << depth` positive cell values.
#[no_mangle]
pub extern "C" fn pd_weight_new(
    depth: u32,
    values: *const f64,
    len: usize,
    out: *mut *mut PdWeight,
) -> PdStatus {
    guarded(|| {
        if values.is_null() {
            return null_arg("values");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let slice = unsafe { std::slice::from_raw_parts(values, len) };
        let cells = match CellVector::new(depth, slice.to_vec()) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match Weight::new(cells) {
            Ok(w) => {
                unsafe { *out = Box::into_raw(Box::new(PdWeight(w))) };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

#[no_mangle]
pub extern "C" fn pd_weight_a2(w: *const PdWeight, out: *mut f64) -> PdStatus {
    weight_constant_impl(w, out, |w| w.a2_constant())
}

#[no_mangle]
pub extern "C" fn pd_weight_ainfty(w: *const PdWeight, out: *mut f64) -> PdStatus {
    weight_constant_impl(w, out, |w| w.ainfty_constant())
}

#[no_mangle]
pub extern "C" fn pd_weight_rh1(w: *const PdWeight, out: *mut f64) -> PdStatus {
    weight_constant_impl(w, out, |w| w.rh1_constant())
}

fn weight_constant_impl(
    w: *const PdWeight,
    out: *mut f64,
    f: impl Fn(&Weight) -> f64,
) -> PdStatus {
    guarded(|| {
        if w.is_null() {
            return null_arg("w");
        }
        if out.is_null() {
            return null_arg("out");
        }
        unsafe { *out = f(&(*w).0) };
        PdStatus::PdOk
    })
}

#[no_mangle]
pub extern "C" fn pd_weight_free(w: *mut PdWeight) {
    if !w.is_null() {
        drop(unsafe { Box::from_raw(w) });
    }
}

// ---- weighted norms and batteries ------------------------------------------

/// `L^2(u)`-vs-`L^2(v)` operator norm of the kernel; `v_inv` holds the cell
/// values of `v^{-1}`.
#[no_mangle]
pub extern "C" fn pd_weighted_norm(
    kernel: *const PdKernel,
    v_inv: *const PdWeight,
    u: *const PdWeight,
    out: *mut f64,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if v_inv.is_null() {
            return null_arg("v_inv");
        }
        if u.is_null() {
            return null_arg("u");
        }
        if out.is_null() {
            return null_arg("out");
        }
        match weighted_norm(unsafe { &(*kernel).0 }, unsafe { &(*v_inv).0 }, unsafe {
            &(*u).0
        }) {
            Ok(n) => {
                unsafe { *out = n };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Largest constant in the nine-condition two-weight battery.
#[no_mangle]
pub extern "C" fn pd_two_weight_h(
    kernel: *const PdKernel,
    v_inv: *const PdWeight,
    u: *const PdWeight,
    out: *mut f64,
) -> PdStatus {
    guarded(|| {
        if kernel.is_null() {
            return null_arg("kernel");
        }
        if v_inv.is_null() {
            return null_arg("v_inv");
        }
        if u.is_null() {
            return null_arg("u");
        }
        if out.is_null() {
            return null_arg("out");
        }
        let pair = match WeightPair::new(unsafe { (*v_inv).0.clone() }, unsafe {
            (*u).0.clone()
        }) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        match pdyadic::two_weight_battery(&pair, unsafe { &(*kernel).0 }) {
            Ok(b) => {
                unsafe { *out = b.h };
                PdStatus::PdOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Free a string returned by this library.
#[no_mangle]
pub extern "C" fn pd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
