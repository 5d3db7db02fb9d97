//! C ABI over `dslt_core`.
//!
//! Every function returns a [`DsltStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and can be fetched
//! with [`dslt_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dslt_core::chaos::{chaos_total_norm, even_series_closed, odd_series_closed};
use dslt_core::covariance::{fbm_cov, HurstParams};
use dslt_core::error::DsltError;
use dslt_core::estimators::alpha_prime_estimate;
use dslt_core::mollifier::mean_alpha_eps;
use dslt_core::pathgen::{FbmPath, PathSampler, Sampler, SamplerMethod, TimeGrid};
use dslt_core::quadrature::{bound_ratio, chaos_norm_integral, second_moment_integral, CaseGeometry, CaseId};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsltStatus {
    Ok = 0,
    Domain = 1,
    Factorization = 2,
    Embedding = 3,
    Contract = 4,
    Numerical = 5,
    Singular = 6,
    Io = 7,
    Parse = 8,
    NullPointer = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Path sampling method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsltMethod {
    Cholesky = 0,
    Circulant = 1,
}

/// Opaque reusable path sampler.
pub struct DsltSampler {
    inner: Sampler,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut b = e.borrow_mut();
        b.clear();
        b.extend(msg.bytes().filter(|&c| c != 0));
    });
}

fn status_of(err: &DsltError) -> DsltStatus {
    match err {
        DsltError::Domain(_) => DsltStatus::Domain,
        DsltError::Factorization { .. } => DsltStatus::Factorization,
        DsltError::Embedding { .. } => DsltStatus::Embedding,
        DsltError::Contract(_) => DsltStatus::Contract,
        DsltError::Numerical(_) => DsltStatus::Numerical,
        DsltError::Singular(_) => DsltStatus::Singular,
        DsltError::Io(_) => DsltStatus::Io,
        DsltError::Parse(_) => DsltStatus::Parse,
    }
}

enum Fail {
    Core(DsltError),
    Null(&'static str),
    Small(usize),
}

impl From<DsltError> for Fail {
    fn from(e: DsltError) -> Self {
        Fail::Core(e)
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> DsltStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsltStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(name))) => {
            set_error(&format!("null pointer: {name}"));
            DsltStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(&format!("buffer too small: need {need} elements"));
            DsltStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic");
            DsltStatus::Panic
        }
    }
}

/// Write `v` through `out`.
///
/// # Safety
/// `out` must be null or valid for writes.
unsafe fn put<T>(out: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    out.write(v);
    Ok(())
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dslt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dslt_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// `Cov(B_s, B_t)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_fbm_cov(hurst: f64, s: f64, t: f64, out: *mut f64) -> DsltStatus {
    guard(|| {
        let v = fbm_cov(HurstParams::new(hurst)?, s, t)?;
        put(out, v, "out")
    })
}

/// Create a sampler on `steps` uniform steps of `[0, t_max]`.
///
/// # Safety
/// `out` must be valid for writes; release the handle with [`dslt_sampler_free`].
#[no_mangle]
pub unsafe extern "C" fn dslt_sampler_new(
    hurst: f64,
    t_max: f64,
    steps: usize,
    method: DsltMethod,
    out: *mut *mut DsltSampler,
) -> DsltStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let m = match method {
            DsltMethod::Cholesky => SamplerMethod::Cholesky,
            DsltMethod::Circulant => SamplerMethod::Circulant,
        };
        let inner = Sampler::new(HurstParams::new(hurst)?, TimeGrid::new(t_max, steps)?, m)?;
        put(out, Box::into_raw(Box::new(DsltSampler { inner })), "out")
    })
}

/// Sample path `stream` of `seed` into `values`, which must hold `steps + 1` doubles.
///
/// # Safety
/// `sampler` must come from [`dslt_sampler_new`]; `values` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_sampler_sample(
    sampler: *const DsltSampler,
    seed: u64,
    stream: u64,
    values: *mut f64,
    len: usize,
) -> DsltStatus {
    guard(|| {
        let s = sampler.as_ref().ok_or(Fail::Null("sampler"))?;
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        let need = s.inner.grid().steps() + 1;
        if len < need {
            return Err(Fail::Small(need));
        }
        let path = s.inner.sample_stream(seed, stream);
        ptr::copy_nonoverlapping(path.values.as_ptr(), values, need);
        Ok(())
    })
}

/// Release a sampler; null is ignored.
///
/// # Safety
/// `sampler` must be null or come from [`dslt_sampler_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dslt_sampler_free(sampler: *mut DsltSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// `E[alpha'_{t,eps}(y)]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_mean_alpha_eps(hurst: f64, t: f64, eps: f64, y: f64, out: *mut f64) -> DsltStatus {
    guard(|| {
        let v = mean_alpha_eps(HurstParams::new(hurst)?, t, eps, y)?;
        put(out, v, "out")
    })
}

/// Mollified estimator on a path given by `len` values on a uniform grid of `[0, t_max]`.
///
/// # Safety
/// `values` must be valid for `len` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_alpha_prime_estimate(
    hurst: f64,
    t_max: f64,
    values: *const f64,
    len: usize,
    t: f64,
    eps: f64,
    y: f64,
    out: *mut f64,
) -> DsltStatus {
    guard(|| {
        if values.is_null() {
            return Err(Fail::Null("values"));
        }
        if len < 3 {
            return Err(Fail::Small(3));
        }
        let vals = std::slice::from_raw_parts(values, len).to_vec();
        let grid = TimeGrid::new(t_max, len - 1)?;
        let path = FbmPath::from_values(HurstParams::new(hurst)?, grid, vals, SamplerMethod::Cholesky)?;
        put(out, alpha_prime_estimate(&path, t, eps, y)?, "out")
    })
}

/// Quadrature value of `E[alpha'_{t,eps}(0)^2]`; `eps = 0` gives the limit.
///
/// # Safety
/// Out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_second_moment(
    hurst: f64,
    t: f64,
    eps: f64,
    out_value: *mut f64,
    out_err: *mut f64,
) -> DsltStatus {
    guard(|| {
        let q = second_moment_integral(HurstParams::new(hurst)?, t, eps)?;
        put(out_value, q.value, "out_value")?;
        put(out_err, q.abs_err, "out_err")
    })
}

/// Limit second moment by refinement; `out_converged` is 1 on Cauchy convergence.
///
/// # Safety
/// Out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_chaos_norm_integral(
    hurst: f64,
    t: f64,
    tol: f64,
    out_value: *mut f64,
    out_err: *mut f64,
    out_converged: *mut i32,
) -> DsltStatus {
    guard(|| {
        let r = chaos_norm_integral(HurstParams::new(hurst)?, t, tol)?;
        put(out_value, r.quad.value, "out_value")?;
        put(out_err, r.quad.abs_err, "out_err")?;
        put(out_converged, i32::from(r.quad.converged), "out_converged")
    })
}

/// Sum of the chaos norms up to `m_max` plus the extrapolated tail.
///
/// # Safety
/// Out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_chaos_total_norm(
    hurst: f64,
    t: f64,
    m_max: usize,
    tol: f64,
    out_total: *mut f64,
    out_err: *mut f64,
) -> DsltStatus {
    guard(|| {
        let r = chaos_total_norm(HurstParams::new(hurst)?, t, m_max, tol)?;
        put(out_total, r.total, "out_total")?;
        put(out_err, r.abs_err, "out_err")
    })
}

/// Closed form of the odd generating series.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_odd_series(gamma: f64, out: *mut f64) -> DsltStatus {
    guard(|| put(out, odd_series_closed(gamma)?, "out"))
}

/// Closed form of the even generating series.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_even_series(gamma: f64, out: *mut f64) -> DsltStatus {
    guard(|| put(out, even_series_closed(gamma)?, "out"))
}

/// Determinant over the case bound for gaps `(a, b, c)`; `case_id` is 1, 2 or 3.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dslt_bound_ratio(hurst: f64, case_id: i32, a: f64, b: f64, c: f64, out: *mut f64) -> DsltStatus {
    guard(|| {
        let case = match case_id {
            1 => CaseId::Case1,
            2 => CaseId::Case2,
            3 => CaseId::Case3,
            other => return Err(DsltError::Domain(format!("case must be 1, 2 or 3, got {other}")).into()),
        };
        let g = CaseGeometry::new(case, a, b, c)?;
        put(out, bound_ratio(HurstParams::new(hurst)?, &g), "out")
    })
}
