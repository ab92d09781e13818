//! C ABI over the `lumpnet` crate.
//!
//! Objects cross the boundary as opaque handles created by `*_load`,
//! `lumpnet_max_lumpability` and `lumpnet_reduce`, and released by the
//! matching `*_free`. Every fallible call returns a [`LumpnetStatus`];
//! on failure a message is available from [`lumpnet_last_error`] on the
//! same thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lumpnet::lump::LumpCheckError;
use lumpnet::{io, Error, Lumping, Mode, Network};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LumpnetStatus {
    Ok = 0,
    VerificationFailed = 1,
    InputError = 2,
    InternalError = 3,
    NullPointer = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LumpnetMode {
    Exact = 0,
    Proportional = 1,
}

impl From<LumpnetMode> for Mode {
    fn from(m: LumpnetMode) -> Self {
        match m {
            LumpnetMode::Exact => Mode::Exact,
            LumpnetMode::Proportional => Mode::Proportional,
        }
    }
}

/// Opaque network handle.
pub struct LumpnetNetwork(Network);

/// Opaque lumping handle.
pub struct LumpnetLumping(Lumping);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: LumpnetStatus, msg: impl Into<String>) -> LumpnetStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> LumpnetStatus {
    let status = match e {
        Error::Internal(_) => LumpnetStatus::InternalError,
        _ => LumpnetStatus::InputError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LumpnetStatus) -> LumpnetStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LumpnetStatus::Panic, "panic inside lumpnet"),
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, LumpnetStatus> {
    if p.is_null() {
        return Err(fail(LumpnetStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(LumpnetStatus::InputError, "path is not valid UTF-8"))
}

/// Message describing the last failure on this thread, or null. The
/// pointer stays valid until the next lumpnet call on the same thread.
#[no_mangle]
pub extern "C" fn lumpnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a network document.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_network_load(
    path: *const c_char,
    out: *mut *mut LumpnetNetwork,
) -> LumpnetStatus {
    guard(|| {
        if out.is_null() {
            return fail(LumpnetStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match io::load_network(path) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(LumpnetNetwork(net)));
                LumpnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Writes a network document.
///
/// # Safety
/// `net` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_network_save(
    net: *const LumpnetNetwork,
    path: *const c_char,
) -> LumpnetStatus {
    guard(|| {
        let Some(net) = net.as_ref() else {
            return fail(LumpnetStatus::NullPointer, "net is null");
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match io::save_network(&net.0, path) {
            Ok(()) => LumpnetStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `net` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_network_free(net: *mut LumpnetNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of layers, or 0 for a null handle.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_network_depth(net: *const LumpnetNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.depth())
}

/// Width of layer `l` (0 is the input), or 0 when out of range.
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_network_width(net: *const LumpnetNetwork, l: usize) -> usize {
    match net.as_ref() {
        Some(n) if l <= n.0.depth() => n.0.width(l),
        _ => 0,
    }
}

/// Evaluates the network on `x` (length `x_len`) into `y` (length
/// `y_len`, at least the output width).
///
/// # Safety
/// `x` and `y` must point to `x_len` and `y_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_network_forward(
    net: *const LumpnetNetwork,
    x: *const f64,
    x_len: usize,
    y: *mut f64,
    y_len: usize,
) -> LumpnetStatus {
    guard(|| {
        let Some(net) = net.as_ref() else {
            return fail(LumpnetStatus::NullPointer, "net is null");
        };
        if x.is_null() || y.is_null() {
            return fail(LumpnetStatus::NullPointer, "x or y is null");
        }
        let out_width = net.0.output_width();
        if y_len < out_width {
            return fail(
                LumpnetStatus::InputError,
                format!("output buffer holds {y_len} values, need {out_width}"),
            );
        }
        let xs = std::slice::from_raw_parts(x, x_len);
        match lumpnet::forward(&net.0, xs) {
            Ok(v) => {
                std::slice::from_raw_parts_mut(y, out_width).copy_from_slice(&v);
                LumpnetStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Computes the maximal lumping of `net`.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_max_lumpability(
    net: *const LumpnetNetwork,
    mode: LumpnetMode,
    tol: f64,
    out: *mut *mut LumpnetLumping,
) -> LumpnetStatus {
    guard(|| {
        let Some(net) = net.as_ref() else {
            return fail(LumpnetStatus::NullPointer, "net is null");
        };
        if out.is_null() {
            return fail(LumpnetStatus::NullPointer, "out is null");
        }
        if !(tol.is_finite() && tol >= 0.0) {
            return fail(LumpnetStatus::InputError, format!("tolerance {tol} must be finite and >= 0"));
        }
        let lump = lumpnet::max_lumpability(&net.0, mode.into(), tol);
        *out = Box::into_raw(Box::new(LumpnetLumping(lump)));
        LumpnetStatus::Ok
    })
}

/// # Safety
/// `lump` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_lumping_free(lump: *mut LumpnetLumping) {
    if !lump.is_null() {
        drop(Box::from_raw(lump));
    }
}

/// Number of blocks in layer `l`, or 0 when out of range.
///
/// # Safety
/// `lump` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_lumping_block_count(lump: *const LumpnetLumping, l: usize) -> usize {
    match lump.as_ref() {
        Some(p) if l < p.0.layers().len() => p.0.layer(l).len(),
        _ => 0,
    }
}

/// Builds the reduced network.
///
/// # Safety
/// `net` and `lump` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_reduce(
    net: *const LumpnetNetwork,
    lump: *const LumpnetLumping,
    out: *mut *mut LumpnetNetwork,
) -> LumpnetStatus {
    guard(|| {
        let (Some(net), Some(lump)) = (net.as_ref(), lump.as_ref()) else {
            return fail(LumpnetStatus::NullPointer, "net or lump is null");
        };
        if out.is_null() {
            return fail(LumpnetStatus::NullPointer, "out is null");
        }
        match lumpnet::reduce(&net.0, &lump.0) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(LumpnetNetwork(r)));
                LumpnetStatus::Ok
            }
            Err(e @ Error::InvalidLumping(_)) => fail(LumpnetStatus::VerificationFailed, e.to_string()),
            Err(e) => from_error(e),
        }
    })
}

/// Checks every lumpability equation of `lump` on `net`. Returns
/// `VerificationFailed` on violated equations and `InputError` when the
/// lumping does not fit the network.
///
/// # Safety
/// `net` and `lump` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn lumpnet_check(
    net: *const LumpnetNetwork,
    lump: *const LumpnetLumping,
    tol: f64,
) -> LumpnetStatus {
    guard(|| {
        let (Some(net), Some(lump)) = (net.as_ref(), lump.as_ref()) else {
            return fail(LumpnetStatus::NullPointer, "net or lump is null");
        };
        match lumpnet::check_lumpability(&net.0, &lump.0, tol) {
            Ok(()) => LumpnetStatus::Ok,
            Err(e @ LumpCheckError::Shape(_)) => fail(LumpnetStatus::InputError, e.to_string()),
            Err(e) => fail(LumpnetStatus::VerificationFailed, e.to_string()),
        }
    })
}
