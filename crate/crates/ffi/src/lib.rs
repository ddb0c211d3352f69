//! C interface to `polyrelu`.
//!
//! Every function returns a [`PolyreluStatus`] and writes results through out
//! pointers. Objects are opaque handles created by `*_new`/`*_fit`/`*_train`
//! functions and released with the matching `*_free`. After a failure,
//! [`polyrelu_last_error`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::ArrayView2;
use polyrelu::cs_solve::{solve, CsProblem, SolverOptions, Variant};
use polyrelu::dnn::{train_network, Architecture, Network, Precision, TrainConfig};
use polyrelu::legendre::{assemble_system, legendre_1d, ExpansionCoefficients};
use polyrelu::multiindex::{hc_cardinality, hyperbolic_cross, MultiIndexSet};
use polyrelu::targets::{TargetFunction, TargetSpec};
use polyrelu::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyreluStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    Domain = 3,
    CapExceeded = 4,
    Numerical = 5,
    Io = 6,
    Parse = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Sparse-recovery program used by [`polyrelu_cs_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyreluCsVariant {
    /// `parameter` is the residual tolerance η.
    Qcbp = 0,
    /// `parameter` is the regularization weight μ.
    Lasso = 1,
    /// `parameter` is the regularization weight μ.
    SrLasso = 2,
}

/// A downward-closed set of multi-indices.
pub struct PolyreluIndexSet {
    inner: MultiIndexSet,
}

/// A test function on `[-1, 1]^d`.
pub struct PolyreluTarget {
    inner: TargetFunction,
}

/// A Legendre expansion.
pub struct PolyreluExpansion {
    inner: ExpansionCoefficients,
}

/// A trained ReLU network.
pub struct PolyreluNetwork {
    inner: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PolyreluStatus {
    match e {
        Error::InvalidArgument(_) => PolyreluStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => PolyreluStatus::DimensionMismatch,
        Error::Domain { .. } => PolyreluStatus::Domain,
        Error::CapExceeded { .. } | Error::SearchBudgetExceeded { .. } => PolyreluStatus::CapExceeded,
        Error::SolverDivergence { .. } | Error::Numerical(_) => PolyreluStatus::Numerical,
        Error::Io(_) => PolyreluStatus::Io,
        Error::Parse(_) | Error::Json(_) => PolyreluStatus::Parse,
    }
}

struct Fail(PolyreluStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PolyreluStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(PolyreluStatus::InvalidArgument, msg.into())
}

// Runs `f`, converting errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> PolyreluStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolyreluStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PolyreluStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn points<'a>(x: *const f64, m: usize, d: usize) -> Result<ArrayView2<'a, f64>, Fail> {
    let n = m.checked_mul(d).ok_or_else(|| invalid("m * d overflows"))?;
    let data = slice(x, n, "points")?;
    ArrayView2::from_shape((m, d), data).map_err(|e| invalid(e.to_string()))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn polyrelu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Orthonormal Legendre polynomial of degree `nu` at `x`.
///
/// # Safety
/// `result` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_legendre(nu: u32, x: f64, result: *mut f64) -> PolyreluStatus {
    guard(|| {
        *out(result, "result")? = legendre_1d(nu, x)?;
        Ok(())
    })
}

/// `|Λ^HC_s|` in dimension `d`.
///
/// # Safety
/// `result` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_hc_cardinality(d: usize, s: usize, result: *mut u64) -> PolyreluStatus {
    guard(|| {
        let r = out(result, "result")?;
        if d == 0 || s == 0 {
            return Err(invalid("d and s must be positive"));
        }
        *r = u64::try_from(hc_cardinality(d, s)).map_err(|_| invalid("cardinality exceeds 64 bits"))?;
        Ok(())
    })
}

/// Hyperbolic cross of degree `s` in dimension `d`.
///
/// # Safety
/// `set` must be a valid pointer; on success it receives a handle to free
/// with [`polyrelu_index_set_free`].
#[no_mangle]
pub unsafe extern "C" fn polyrelu_index_set_hyperbolic_cross(d: usize, s: usize, set: *mut *mut PolyreluIndexSet) -> PolyreluStatus {
    guard(|| {
        let slot = out(set, "set")?;
        *slot = boxed(PolyreluIndexSet { inner: hyperbolic_cross(d, s)? });
        Ok(())
    })
}

/// # Safety
/// `set` must be a handle from this library and `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_index_set_len(set: *const PolyreluIndexSet, result: *mut usize) -> PolyreluStatus {
    guard(|| {
        *out(result, "result")? = handle(set, "set")?.inner.len();
        Ok(())
    })
}

/// # Safety
/// `set` must be a handle from this library and `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_index_set_dim(set: *const PolyreluIndexSet, result: *mut usize) -> PolyreluStatus {
    guard(|| {
        *out(result, "result")? = handle(set, "set")?.inner.dim();
        Ok(())
    })
}

/// Copies the `i`-th multi-index (in graded order) into `nu[0..dim]`.
///
/// # Safety
/// `nu` must point to at least `dim` writable values.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_index_set_get(set: *const PolyreluIndexSet, i: usize, nu: *mut u32, dim: usize) -> PolyreluStatus {
    guard(|| {
        let s = &handle(set, "set")?.inner;
        if dim != s.dim() {
            return Err(Error::DimensionMismatch { expected: s.dim(), found: dim }.into());
        }
        let idx = s.indices().get(i).ok_or_else(|| invalid(format!("index {i} out of range for {} indices", s.len())))?;
        if nu.is_null() {
            return Err(null("nu"));
        }
        std::slice::from_raw_parts_mut(nu, dim).copy_from_slice(idx.entries());
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_index_set_free(set: *mut PolyreluIndexSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Builds a target from its JSON description, for example
/// `{"name":"exp_cos","d":4}` or `{"name":"logsin","k":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `target` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_target_from_json(json: *const c_char, target: *mut *mut PolyreluTarget) -> PolyreluStatus {
    guard(|| {
        let slot = out(target, "target")?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Fail(PolyreluStatus::Parse, e.to_string()))?;
        let spec: TargetSpec = serde_json::from_str(text).map_err(|e| Fail(PolyreluStatus::Parse, e.to_string()))?;
        *slot = boxed(PolyreluTarget { inner: TargetFunction::from_spec(spec)? });
        Ok(())
    })
}

/// Evaluates the target at the `m` rows of the row-major `m × d` array `x`.
///
/// # Safety
/// `x` must hold `m * d` values and `y` room for `m`.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_target_eval(target: *const PolyreluTarget, x: *const f64, m: usize, d: usize, y: *mut f64) -> PolyreluStatus {
    guard(|| {
        let t = &handle(target, "target")?.inner;
        if d != t.dim() {
            return Err(Error::DimensionMismatch { expected: t.dim(), found: d }.into());
        }
        let pts = points(x, m, d)?;
        if m > 0 && y.is_null() {
            return Err(null("y"));
        }
        for (i, row) in pts.rows().into_iter().enumerate() {
            *y.add(i) = t.eval(row.as_slice().expect("row-major"));
        }
        Ok(())
    })
}

/// # Safety
/// `target` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_target_free(target: *mut PolyreluTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Recovers Legendre coefficients on `set` from `m` samples by (weighted)
/// ℓ¹ minimization. `x` is row-major `m × d`.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `expansion` receives a
/// handle to free with [`polyrelu_expansion_free`].
#[no_mangle]
pub unsafe extern "C" fn polyrelu_cs_fit(
    set: *const PolyreluIndexSet,
    x: *const f64,
    y: *const f64,
    m: usize,
    d: usize,
    variant: PolyreluCsVariant,
    parameter: f64,
    weighted: bool,
    max_iterations: usize,
    expansion: *mut *mut PolyreluExpansion,
) -> PolyreluStatus {
    guard(|| {
        let slot = out(expansion, "expansion")?;
        let set = &handle(set, "set")?.inner;
        let pts = points(x, m, d)?;
        let values = slice(y, m, "y")?;
        let (a, rhs) = assemble_system(pts, values, set)?;
        let v = match variant {
            PolyreluCsVariant::Qcbp => Variant::Qcbp { eta: parameter },
            PolyreluCsVariant::Lasso => Variant::Lasso { mu: parameter },
            PolyreluCsVariant::SrLasso => Variant::SrLasso { mu: parameter },
        };
        let problem = if weighted { CsProblem::weighted(a, rhs, v)? } else { CsProblem::new(a, rhs, None, v)? };
        let opts = SolverOptions { max_iterations, ..Default::default() };
        *slot = boxed(PolyreluExpansion { inner: solve(&problem, &opts)?.coefficients });
        Ok(())
    })
}

/// # Safety
/// `expansion` must be a handle from this library and `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_expansion_len(expansion: *const PolyreluExpansion, result: *mut usize) -> PolyreluStatus {
    guard(|| {
        *out(result, "result")? = handle(expansion, "expansion")?.inner.values().len();
        Ok(())
    })
}

/// Copies the coefficients, in the order of the index set, into `values[0..len]`.
///
/// # Safety
/// `values` must have room for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_expansion_coefficients(expansion: *const PolyreluExpansion, values: *mut f64, len: usize) -> PolyreluStatus {
    guard(|| {
        let c = handle(expansion, "expansion")?.inner.values();
        if len != c.len() {
            return Err(Error::DimensionMismatch { expected: c.len(), found: len }.into());
        }
        if len > 0 {
            if values.is_null() {
                return Err(null("values"));
            }
            std::slice::from_raw_parts_mut(values, len).iter_mut().zip(c.iter()).for_each(|(o, v)| *o = *v);
        }
        Ok(())
    })
}

/// Evaluates the expansion at the rows of the row-major `m × d` array `x`.
///
/// # Safety
/// `x` must hold `m * d` values and `y` room for `m`.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_expansion_eval(expansion: *const PolyreluExpansion, x: *const f64, m: usize, d: usize, y: *mut f64) -> PolyreluStatus {
    guard(|| {
        let c = &handle(expansion, "expansion")?.inner;
        let pts = points(x, m, d)?;
        let vals = c.eval_many(pts)?;
        if m > 0 {
            if y.is_null() {
                return Err(null("y"));
            }
            std::slice::from_raw_parts_mut(y, m).copy_from_slice(&vals);
        }
        Ok(())
    })
}

/// # Safety
/// `expansion` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_expansion_free(expansion: *mut PolyreluExpansion) {
    if !expansion.is_null() {
        drop(Box::from_raw(expansion));
    }
}

/// Trains a `hidden_layers × width` ReLU network with Adam and the default
/// exponentially decaying learning rate, stopping when the loss reaches
/// `tolerance` or after `epochs` epochs. `final_loss` may be null.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `network` receives a
/// handle to free with [`polyrelu_network_free`].
#[no_mangle]
pub unsafe extern "C" fn polyrelu_network_train(
    x: *const f64,
    y: *const f64,
    m: usize,
    d: usize,
    hidden_layers: usize,
    width: usize,
    epochs: usize,
    tolerance: f64,
    seed: u64,
    single_precision: bool,
    network: *mut *mut PolyreluNetwork,
    final_loss: *mut f64,
) -> PolyreluStatus {
    guard(|| {
        let slot = out(network, "network")?;
        let pts = points(x, m, d)?;
        let values = slice(y, m, "y")?;
        let cfg = TrainConfig {
            k_final: epochs,
            eps_tol: tolerance,
            seed,
            precision: if single_precision { Precision::Single } else { Precision::Double },
            ..Default::default()
        };
        let (net, trace) = train_network(Architecture::new(d, hidden_layers, width)?, pts, values, &cfg)?;
        if let Some(l) = final_loss.as_mut() {
            *l = trace.best_loss();
        }
        *slot = boxed(PolyreluNetwork { inner: net });
        Ok(())
    })
}

/// Evaluates the network at the rows of the row-major `m × d` array `x`.
///
/// # Safety
/// `x` must hold `m * d` values and `y` room for `m`.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_network_eval(network: *const PolyreluNetwork, x: *const f64, m: usize, d: usize, y: *mut f64) -> PolyreluStatus {
    guard(|| {
        let net = &handle(network, "network")?.inner;
        let vals = net.forward_batch(points(x, m, d)?)?;
        if m > 0 {
            if y.is_null() {
                return Err(null("y"));
            }
            std::slice::from_raw_parts_mut(y, m).copy_from_slice(&vals);
        }
        Ok(())
    })
}

/// Largest absolute weight or bias.
///
/// # Safety
/// `network` must be a handle from this library and `result` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_network_max_abs_weight(network: *const PolyreluNetwork, result: *mut f64) -> PolyreluStatus {
    guard(|| {
        *out(result, "result")? = handle(network, "network")?.inner.max_abs_weight();
        Ok(())
    })
}

/// # Safety
/// `network` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn polyrelu_network_free(network: *mut PolyreluNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}
