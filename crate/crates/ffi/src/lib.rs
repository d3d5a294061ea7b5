//! C ABI over `vqe-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a [`VqeStatus`];
//! on failure the message is kept per thread and read back with
//! [`vqe_last_error_message`]. Panics are caught and reported as
//! [`VqeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use vqe_core::bounds::{certify, BoundInputs};
use vqe_core::estimate::{build_groups, covariance_matrix, estimate_expectation, EstimateOptions, EstimatorMode};
use vqe_core::fermion::{build_hamiltonian, jordan_wigner, parse_integrals};
use vqe_core::rng::stream_rng;
use vqe_core::simulator::{exact_eigensystem, expectation_and_variance};
use vqe_core::{Error, PauliSum, StateVector};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VqeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Capacity = 4,
    NotHermitian = 5,
    Parse = 6,
    Validation = 7,
    BoundInapplicable = 8,
    Degenerate = 9,
    BudgetExhausted = 10,
    Io = 11,
    Internal = 12,
    Panic = 13,
}

impl From<&Error> for VqeStatus {
    fn from(e: &Error) -> VqeStatus {
        match e {
            Error::Dimension { .. } => VqeStatus::Dimension,
            Error::Capacity { .. } => VqeStatus::Capacity,
            Error::InvalidArgument(_) | Error::ModeMismatch { .. } => VqeStatus::InvalidArgument,
            Error::NotHermitian(_) => VqeStatus::NotHermitian,
            Error::Parse { .. } | Error::Json(_) => VqeStatus::Parse,
            Error::Validation(_) => VqeStatus::Validation,
            Error::BoundInapplicable(_) => VqeStatus::BoundInapplicable,
            Error::Degenerate(_) => VqeStatus::Degenerate,
            Error::BudgetExhausted { .. } => VqeStatus::BudgetExhausted,
            Error::Io(_) => VqeStatus::Io,
            Error::Contract(_) | Error::GridTooCoarse { .. } => VqeStatus::Internal,
        }
    }
}

/// Qubit Hamiltonian handle.
pub struct VqeHamiltonian(PauliSum);

/// State-vector handle.
pub struct VqeState(StateVector);

/// Sampling mode for [`vqe_estimate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VqeEstimatorMode {
    Frequentist = 0,
    Bayesian = 1,
}

/// Outcome of [`vqe_estimate`].
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VqeEstimate {
    pub value: f64,
    pub variance: f64,
    pub preparations: u64,
}

/// Bounds from [`vqe_certify`]. Inapplicable bounds are NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VqeCertificate {
    pub weinstein_low: f64,
    pub weinstein_high: f64,
    pub ground_overlap: f64,
    pub excited_overlap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), VqeFailure>) -> VqeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            VqeStatus::Ok
        }
        Ok(Err(VqeFailure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside vqe-ffi".into());
            VqeStatus::Panic
        }
    }
}

struct VqeFailure(VqeStatus, String);

impl From<Error> for VqeFailure {
    fn from(e: Error) -> VqeFailure {
        VqeFailure(VqeStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> VqeFailure {
    VqeFailure(VqeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, VqeFailure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, VqeFailure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| VqeFailure(VqeStatus::InvalidArgument, format!("{what} is not UTF-8: {e}")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), VqeFailure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vqe_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a Hamiltonian from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_hamiltonian_from_json(json: *const c_char, out: *mut *mut VqeHamiltonian) -> VqeStatus {
    guard(|| {
        let h = PauliSum::from_json_str(text(json, "json")?)?;
        emit(out, VqeHamiltonian(h))
    })
}

/// Builds the Jordan-Wigner qubit Hamiltonian from integral-file text.
///
/// # Safety
/// `integrals` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_hamiltonian_from_integrals(
    integrals: *const c_char,
    out: *mut *mut VqeHamiltonian,
) -> VqeStatus {
    guard(|| {
        let ints = parse_integrals(text(integrals, "integrals")?)?;
        let h = jordan_wigner(&build_hamiltonian(&ints)?)?.simplify();
        emit(out, VqeHamiltonian(h))
    })
}

/// # Safety
/// `h` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vqe_hamiltonian_free(h: *mut VqeHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_hamiltonian_n_qubits(h: *const VqeHamiltonian, out: *mut usize) -> VqeStatus {
    guard(|| {
        let h = borrow(h, "hamiltonian")?;
        *out.as_mut().ok_or_else(|| null("out"))? = h.0.n_qubits();
        Ok(())
    })
}

/// Number of stored Pauli terms.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_hamiltonian_n_terms(h: *const VqeHamiltonian, out: *mut usize) -> VqeStatus {
    guard(|| {
        let h = borrow(h, "hamiltonian")?;
        *out.as_mut().ok_or_else(|| null("out"))? = h.0.len();
        Ok(())
    })
}

/// Lowest eigenvalue by dense diagonalization.
///
/// # Safety
/// `h` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_hamiltonian_ground_energy(h: *const VqeHamiltonian, out: *mut f64) -> VqeStatus {
    guard(|| {
        let h = borrow(h, "hamiltonian")?;
        let e = exact_eigensystem(&h.0)?.ground_energy();
        *out.as_mut().ok_or_else(|| null("out"))? = e;
        Ok(())
    })
}

/// Computational basis state `|index>` on `n_qubits` qubits.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_state_basis(n_qubits: usize, index: usize, out: *mut *mut VqeState) -> VqeStatus {
    guard(|| emit(out, VqeState(StateVector::basis(n_qubits, index)?)))
}

/// State from `len` interleaved `(re, im)` pairs, normalized on input.
///
/// # Safety
/// `re_im` must point to `2 * len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vqe_state_from_amplitudes(re_im: *const f64, len: usize, out: *mut *mut VqeState) -> VqeStatus {
    guard(|| {
        if re_im.is_null() {
            return Err(null("amplitudes"));
        }
        let raw = std::slice::from_raw_parts(re_im, 2 * len);
        let amps = raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        emit(out, VqeState(StateVector::from_amplitudes_normalized(amps)?))
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn vqe_state_free(s: *mut VqeState) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Exact `<H>` and `Var[H]` in the state.
///
/// # Safety
/// Handles must be live; `mean` and `variance` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn vqe_expectation(
    h: *const VqeHamiltonian,
    s: *const VqeState,
    mean: *mut f64,
    variance: *mut f64,
) -> VqeStatus {
    guard(|| {
        let (h, s) = (borrow(h, "hamiltonian")?, borrow(s, "state")?);
        let (m, v) = expectation_and_variance(&s.0, &h.0)?;
        *mean.as_mut().ok_or_else(|| null("mean"))? = m;
        *variance.as_mut().ok_or_else(|| null("variance"))? = v;
        Ok(())
    })
}

/// Sampled estimate of `<H>` to precision `epsilon` with a covariance-aware
/// grouping. `max_preparations` of zero means unlimited.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_estimate(
    h: *const VqeHamiltonian,
    s: *const VqeState,
    epsilon: f64,
    mode: VqeEstimatorMode,
    seed: u64,
    max_preparations: u64,
    out: *mut VqeEstimate,
) -> VqeStatus {
    guard(|| {
        let (h, s) = (borrow(h, "hamiltonian")?, borrow(s, "state")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let plan = build_groups(&h.0, Some(&covariance_matrix(&s.0, &h.0)?))?;
        let mut opts = EstimateOptions::new(match mode {
            VqeEstimatorMode::Frequentist => EstimatorMode::Frequentist,
            VqeEstimatorMode::Bayesian => EstimatorMode::Bayesian,
        });
        opts.max_preparations = (max_preparations > 0).then_some(max_preparations);
        let mut rng = stream_rng(seed, 0);
        let state = &s.0;
        let r = estimate_expectation(&mut || Ok(state.clone()), &h.0, &plan, epsilon, &opts, &mut rng)?;
        *out = VqeEstimate { value: r.value, variance: r.variance_of_estimator, preparations: r.total_preparations };
        Ok(())
    })
}

/// Weinstein interval and overlap bounds from a mean, a variance and a gap
/// lower bound.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vqe_certify(mean: f64, variance: f64, gap: f64, out: *mut VqeCertificate) -> VqeStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let c = certify(&BoundInputs::new(mean, variance, gap, None)?);
        *out = VqeCertificate {
            weinstein_low: c.weinstein.0,
            weinstein_high: c.weinstein.1,
            ground_overlap: c.ground_overlap.unwrap_or(f64::NAN),
            excited_overlap: c.excited_overlap,
        };
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vqe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
