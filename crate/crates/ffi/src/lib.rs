//! C ABI over `pathexplain`.
//!
//! Every fallible function returns a [`PeStatus`] and writes results through
//! caller-provided pointers. On failure, [`pe_last_error_message`] describes
//! the most recent error on the calling thread. Networks are opaque handles
//! released with [`pe_network_free`]; strings returned by the library are
//! released with [`pe_string_free`].
//!
//! Arrays are row-major `double` buffers whose lengths the caller supplies.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pathexplain::{
    integrated_gradients, integrated_hessians, sii_exact, sii_monte_carlo, CoalitionGame, DenseNetwork, Error,
    QuadratureSpec, RiemannRule,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Shape = 4,
    /// A second-order quantity was requested from a ReLU network.
    SecondDerivativeUndefined = 5,
    Budget = 6,
    IntractableDimension = 7,
    Divergence = 8,
    /// A Rust panic was caught at the boundary; the library state is intact.
    Panic = 9,
    Other = 10,
}

/// Riemann rule for path quadrature.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeRule {
    Right = 0,
    Midpoint = 1,
}

impl From<PeRule> for RiemannRule {
    fn from(r: PeRule) -> Self {
        match r {
            PeRule::Right => RiemannRule::Right,
            PeRule::Midpoint => RiemannRule::Midpoint,
        }
    }
}

/// Opaque feed-forward network.
pub struct PeNetwork {
    net: DenseNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PeStatus {
    match e {
        Error::Shape { .. } => PeStatus::Shape,
        Error::InvalidArgument(_) | Error::UnknownPair(..) | Error::EmptyBackground | Error::BaselineMismatch => {
            PeStatus::InvalidArgument
        }
        Error::Parse { .. } | Error::Json(_) => PeStatus::Parse,
        Error::SecondDerivativeUndefined { .. } => PeStatus::SecondDerivativeUndefined,
        Error::Budget { .. } => PeStatus::Budget,
        Error::IntractableDimension { .. } => PeStatus::IntractableDimension,
        Error::Divergence { .. } | Error::AsymmetricHessian(_) => PeStatus::Divergence,
        _ => PeStatus::Other,
    }
}

/// Internal failure carrying its status and message.
struct Failure(PeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PeStatus::NullPointer, format!("{what} is NULL"))
}

/// Run `f`, translating errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            PeStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            PeStatus::Panic
        }
    }
}

unsafe fn network<'a>(net: *const PeNetwork) -> Result<&'a DenseNetwork, Failure> {
    // SAFETY: caller passes a handle obtained from this library, or NULL.
    unsafe { net.as_ref() }.map(|n| &n.net).ok_or_else(|| null("network"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees `len` writable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn check_dim(net: &DenseNetwork, len: usize) -> Result<(), Failure> {
    if net.input_dim() != len {
        return Err(Error::Shape {
            expected: net.input_dim(),
            got: len,
        }
        .into());
    }
    Ok(())
}

unsafe fn write_handle(out: *mut *mut PeNetwork, net: DenseNetwork) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: `out` is non-null and writable per the caller contract.
    unsafe { *out = Box::into_raw(Box::new(PeNetwork { net })) };
    Ok(())
}

/// Message for the most recent failure on this thread; empty after a success.
///
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn pe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a network from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_network_from_json(json: *const c_char, out: *mut *mut PeNetwork) -> PeStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure(PeStatus::Parse, format!("json is not UTF-8: {e}")))?;
        let net = DenseNetwork::from_json(text)?;
        unsafe { write_handle(out, net) }
    })
}

/// Serialize a network to JSON; free the result with [`pe_string_free`].
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_network_to_json(net: *const PeNetwork, out: *mut *mut c_char) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = CString::new(net.to_json()?).map_err(|e| Failure(PeStatus::Other, e.to_string()))?;
        // SAFETY: `out` checked non-null.
        unsafe { *out = json.into_raw() };
        Ok(())
    })
}

/// Release a network handle. NULL is ignored.
///
/// # Safety
/// `net` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pe_network_free(net: *mut PeNetwork) {
    if !net.is_null() {
        // SAFETY: handle was created by `Box::into_raw` in this library.
        drop(unsafe { Box::from_raw(net) });
    }
}

/// Release a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pe_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: string was created by `CString::into_raw` in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_network_input_dim(net: *const PeNetwork, out: *mut usize) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = net.input_dim() };
        Ok(())
    })
}

/// Scalar output `f(x)`.
///
/// # Safety
/// `x` holds `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pe_network_forward(net: *const PeNetwork, x: *const f64, len: usize, out: *mut f64) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let out = unsafe { slice_mut(out, 1, "out") }?;
        check_dim(net, len)?;
        out[0] = net.forward(x)?;
        Ok(())
    })
}

/// Input gradient into `out[len]`.
///
/// # Safety
/// `x` holds `len` doubles; `out` has room for `len`.
#[no_mangle]
pub unsafe extern "C" fn pe_network_gradient(net: *const PeNetwork, x: *const f64, len: usize, out: *mut f64) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let out = unsafe { slice_mut(out, len, "out") }?;
        check_dim(net, len)?;
        out.copy_from_slice(&net.gradient(x)?);
        Ok(())
    })
}

/// Input Hessian into `out[len * len]`, row-major.
///
/// # Safety
/// `x` holds `len` doubles; `out` has room for `len * len`.
#[no_mangle]
pub unsafe extern "C" fn pe_network_hessian(net: *const PeNetwork, x: *const f64, len: usize, out: *mut f64) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let out = unsafe { slice_mut(out, len * len, "out") }?;
        check_dim(net, len)?;
        copy_matrix(&net.hessian(x)?, out);
        Ok(())
    })
}

/// New handle with every ReLU replaced by SoftPlus of sharpness `beta`.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pe_network_softplus_surgery(
    net: *const PeNetwork,
    beta: f64,
    out: *mut *mut PeNetwork,
) -> PeStatus {
    guard(|| {
        let smooth = unsafe { network(net) }?.softplus_surgery(beta)?;
        unsafe { write_handle(out, smooth) }
    })
}

/// Row-major copy; ndarray iterates in logical order regardless of layout.
fn copy_matrix<'a>(m: impl IntoIterator<Item = &'a f64>, out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(m) {
        *o = *v;
    }
}

/// Integrated Gradients with `k` steps into `out[len]`.
///
/// # Safety
/// `x` and `baseline` hold `len` doubles; `out` has room for `len`.
#[no_mangle]
pub unsafe extern "C" fn pe_integrated_gradients(
    net: *const PeNetwork,
    x: *const f64,
    baseline: *const f64,
    len: usize,
    k: usize,
    rule: PeRule,
    out: *mut f64,
) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let b = unsafe { slice(baseline, len, "baseline") }?;
        let out = unsafe { slice_mut(out, len, "out") }?;
        check_dim(net, len)?;
        let quad = QuadratureSpec::new(k, 1)?.with_rule(rule.into());
        out.copy_from_slice(&integrated_gradients(net, x, b, &quad)?.values);
        Ok(())
    })
}

/// Integrated Hessians on a `k x m` grid into `out[len * len]`, row-major.
///
/// # Safety
/// `x` and `baseline` hold `len` doubles; `out` has room for `len * len`.
#[no_mangle]
pub unsafe extern "C" fn pe_integrated_hessians(
    net: *const PeNetwork,
    x: *const f64,
    baseline: *const f64,
    len: usize,
    k: usize,
    m: usize,
    rule: PeRule,
    out: *mut f64,
) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let b = unsafe { slice(baseline, len, "baseline") }?;
        let out = unsafe { slice_mut(out, len * len, "out") }?;
        check_dim(net, len)?;
        let quad = QuadratureSpec::new(k, m)?.with_rule(rule.into());
        copy_matrix(&integrated_hessians(net, x, b, &quad)?.gamma, out);
        Ok(())
    })
}

/// Exact Shapley Interaction Index (at most 20 inputs) into `out[len * len]`.
///
/// The diagonal holds Shapley values.
///
/// # Safety
/// `x` and `baseline` hold `len` doubles; `out` has room for `len * len`.
#[no_mangle]
pub unsafe extern "C" fn pe_sii_exact(
    net: *const PeNetwork,
    x: *const f64,
    baseline: *const f64,
    len: usize,
    out: *mut f64,
) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let b = unsafe { slice(baseline, len, "baseline") }?;
        let out = unsafe { slice_mut(out, len * len, "out") }?;
        check_dim(net, len)?;
        copy_matrix(&sii_exact(&CoalitionGame::new(net, x, b)?)?.gamma, out);
        Ok(())
    })
}

/// Permutation-sampled Shapley Interaction Index into `out[len * len]`.
///
/// `std_error` may be NULL; otherwise it receives per-entry standard errors.
///
/// # Safety
/// `x` and `baseline` hold `len` doubles; `out` and a non-NULL `std_error`
/// have room for `len * len`.
#[no_mangle]
pub unsafe extern "C" fn pe_sii_monte_carlo(
    net: *const PeNetwork,
    x: *const f64,
    baseline: *const f64,
    len: usize,
    n_samples: usize,
    seed: u64,
    out: *mut f64,
    std_error: *mut f64,
) -> PeStatus {
    guard(|| {
        let net = unsafe { network(net) }?;
        let x = unsafe { slice(x, len, "x") }?;
        let b = unsafe { slice(baseline, len, "baseline") }?;
        let out = unsafe { slice_mut(out, len * len, "out") }?;
        check_dim(net, len)?;
        let im = sii_monte_carlo(&CoalitionGame::new(net, x, b)?, n_samples, seed)?;
        copy_matrix(&im.gamma, out);
        if !std_error.is_null() {
            let se = unsafe { slice_mut(std_error, len * len, "std_error") }?;
            if let Some(s) = &im.std_error {
                copy_matrix(s, se);
            }
        }
        Ok(())
    })
}
