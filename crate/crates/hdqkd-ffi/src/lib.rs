//! C ABI for the hdqkd simulator.
//!
//! Conventions: objects cross the boundary as opaque handles created by
//! `*_new` functions and released by the matching `*_free`; every fallible
//! call returns an [`HdqkdStatus`] and writes its result through out
//! pointers; `hdqkd_last_error_message` retrieves the thread-local
//! description of the most recent failure. Panics never unwind across the
//! boundary.

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::{c_char, size_t};

use hdqkd::config::SessionConfig;
use hdqkd::hilbert::{detection_probability_ideal, verify_mub, Basis, MubFamily};
use hdqkd::optics::{pinhole_click_probability, OpticalSetup};
use hdqkd::photonics::PulseConfig;
use hdqkd::protocol::{run_session, sift, symbol_counts, SessionLog, SiftResult};
use hdqkd::rng::SessionSeeds;
use hdqkd::security::{
    build_report, key_rate_collective, logical_wall_hours, shannon_entropy, threshold_coherent,
    threshold_individual,
};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdqkdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The requested value is undefined for this input (e.g. QBER of an
    /// empty sifted set).
    Undefined = 3,
    RuntimeError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: HdqkdStatus, msg: impl Into<String>) -> HdqkdStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> HdqkdStatus>(f: F) -> HdqkdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(HdqkdStatus::RuntimeError, "internal panic"),
    }
}

/// Copies the last error message for this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length in bytes, excluding
/// the terminator.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes, or be NULL with
/// `cap == 0` to query the length.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_last_error_message(buf: *mut c_char, cap: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Frees a string allocated by this library.
///
/// # Safety
/// `s` must have been returned by an hdqkd function and not freed before.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(std::ffi::CString::from_raw(s));
    }
}

fn to_c_string(s: String) -> *mut c_char {
    std::ffi::CString::new(s).map_or(std::ptr::null_mut(), |c| c.into_raw())
}

fn basis_from_u32(v: u32) -> Option<Basis> {
    match v {
        0 => Some(Basis::Alpha),
        1 => Some(Basis::AlphaPrime),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Mutually unbiased bases

/// Opaque MUB family handle.
pub struct HdqkdMubFamily(MubFamily);

/// Exact verification report, plain data.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HdqkdMubReport {
    /// 1 when every check passed.
    pub passed: u8,
    pub basis_pairs_checked: u64,
    pub cross_pairs_checked: u64,
    pub worst_deviation: f64,
}

/// Creates the built-in 16-dimensional family.
#[no_mangle]
pub extern "C" fn hdqkd_mub_builtin16_new() -> *mut HdqkdMubFamily {
    Box::into_raw(Box::new(HdqkdMubFamily(MubFamily::builtin_16())))
}

/// Creates the two-dimensional test family {computational, diagonal}.
#[no_mangle]
pub extern "C" fn hdqkd_mub_qubit_new() -> *mut HdqkdMubFamily {
    Box::into_raw(Box::new(HdqkdMubFamily(MubFamily::qubit_test_family())))
}

/// # Safety
/// `family` must be a handle from a `hdqkd_mub_*_new` call, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_mub_free(family: *mut HdqkdMubFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Runs the exact integer verification.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_mub_verify(
    family: *const HdqkdMubFamily,
    out: *mut HdqkdMubReport,
) -> HdqkdStatus {
    guard(|| {
        if family.is_null() || out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        let report = verify_mub(&(*family).0);
        *out = HdqkdMubReport {
            passed: report.passed as u8,
            basis_pairs_checked: report.basis_pairs_checked as u64,
            cross_pairs_checked: report.cross_pairs_checked as u64,
            worst_deviation: report.worst_deviation,
        };
        HdqkdStatus::Ok
    })
}

/// Ideal detection probability `|<bob|alice>|^2` between two family states.
/// Basis labels: 0 = alpha, 1 = alpha_prime.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_detection_probability_ideal(
    family: *const HdqkdMubFamily,
    basis_alice: u32,
    k_alice: size_t,
    basis_bob: u32,
    k_bob: size_t,
    out: *mut f64,
) -> HdqkdStatus {
    guard(|| {
        if family.is_null() || out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        let family = &(*family).0;
        let (Some(ba), Some(bb)) = (basis_from_u32(basis_alice), basis_from_u32(basis_bob)) else {
            return fail(HdqkdStatus::InvalidArgument, "basis must be 0 or 1");
        };
        if k_alice >= family.dim() || k_bob >= family.dim() {
            return fail(
                HdqkdStatus::InvalidArgument,
                format!("state index outside 0..{}", family.dim()),
            );
        }
        match detection_probability_ideal(family.state(ba, k_alice), family.state(bb, k_bob)) {
            Ok(p) => {
                *out = p;
                HdqkdStatus::Ok
            }
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Click probability of the physical (diffraction + pinhole) model at the
/// default geometry with the given pinhole diameter.
///
/// # Safety
/// `family` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_pinhole_click_probability(
    family: *const HdqkdMubFamily,
    basis_alice: u32,
    k_alice: size_t,
    basis_bob: u32,
    k_bob: size_t,
    pinhole_diameter_m: f64,
    out: *mut f64,
) -> HdqkdStatus {
    guard(|| {
        if family.is_null() || out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        let family = &(*family).0;
        let (Some(ba), Some(bb)) = (basis_from_u32(basis_alice), basis_from_u32(basis_bob)) else {
            return fail(HdqkdStatus::InvalidArgument, "basis must be 0 or 1");
        };
        if k_alice >= family.dim() || k_bob >= family.dim() {
            return fail(
                HdqkdStatus::InvalidArgument,
                format!("state index outside 0..{}", family.dim()),
            );
        }
        let mut setup = OpticalSetup::default_for_dim(family.dim());
        setup.pinhole_diameter_m = pinhole_diameter_m;
        match pinhole_click_probability(&setup, &family.mask(ba, k_alice), &family.mask(bb, k_bob))
        {
            Ok(p) => {
                *out = p;
                HdqkdStatus::Ok
            }
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

// ---------------------------------------------------------------------------
// Security analysis

/// `(1 - 1/sqrt(D)) / 2`, the individual-attack error bound.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_threshold_individual(dim: size_t, out: *mut f64) -> HdqkdStatus {
    guard(|| {
        if out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        match threshold_individual(dim) {
            Ok(v) => {
                *out = v;
                HdqkdStatus::Ok
            }
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Collective-attack error bound (root of the key rate).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_threshold_coherent(dim: size_t, out: *mut f64) -> HdqkdStatus {
    guard(|| {
        if out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        match threshold_coherent(dim) {
            Ok(v) => {
                *out = v;
                HdqkdStatus::Ok
            }
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Secret fraction against collective attacks at error rate `qber`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_key_rate_collective(
    qber: f64,
    dim: size_t,
    out: *mut f64,
) -> HdqkdStatus {
    guard(|| {
        if out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        match key_rate_collective(qber, dim) {
            Ok(v) => {
                *out = v;
                HdqkdStatus::Ok
            }
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Shannon entropy in bits of a histogram; `Undefined` when all counts are 0.
///
/// # Safety
/// `counts` must point to `len` readable u64 values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_shannon_entropy(
    counts: *const u64,
    len: size_t,
    out: *mut f64,
) -> HdqkdStatus {
    guard(|| {
        if counts.is_null() || out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        let slice = std::slice::from_raw_parts(counts, len);
        match shannon_entropy(slice) {
            Some(h) => {
                *out = h;
                HdqkdStatus::Ok
            }
            None => fail(HdqkdStatus::Undefined, "entropy of an empty histogram"),
        }
    })
}

// ---------------------------------------------------------------------------
// Sessions

/// Opaque session configuration handle.
pub struct HdqkdSessionConfig(SessionConfig);

/// Opaque session log handle.
pub struct HdqkdSessionLog(SessionLog);

/// Opaque sift result handle.
pub struct HdqkdSiftResult(SiftResult);

/// Creates an ideal-model config. `preset`: 0 selects mu = 0.60 / 50 ns,
/// 1 selects mu = 0.18 / 20 ns. Returns NULL on invalid arguments.
#[no_mangle]
pub extern "C" fn hdqkd_session_config_new(
    dim: size_t,
    preset: u32,
    cycles: u64,
    seed_alice: u64,
    seed_bob: u64,
    seed_channel: u64,
) -> *mut HdqkdSessionConfig {
    let pulse = match preset {
        0 => PulseConfig::preset_mu_a(),
        1 => PulseConfig::preset_mu_b(),
        _ => {
            set_error("preset must be 0 (mu-a) or 1 (mu-b)");
            return std::ptr::null_mut();
        }
    };
    let config = SessionConfig::ideal(
        dim,
        pulse,
        cycles,
        SessionSeeds {
            alice: seed_alice,
            bob: seed_bob,
            channel: seed_channel,
        },
    );
    if let Err(e) = config.validate() {
        set_error(e.to_string());
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(HdqkdSessionConfig(config)))
}

/// # Safety
/// `config` must be a handle from `hdqkd_session_config_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_session_config_free(config: *mut HdqkdSessionConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Overrides the overall efficiency eta.
///
/// # Safety
/// `config` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_session_config_set_eta(
    config: *mut HdqkdSessionConfig,
    eta: f64,
) -> HdqkdStatus {
    guard(|| {
        if config.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        (*config).0.pulse.eta = eta;
        match (*config).0.validate() {
            Ok(()) => HdqkdStatus::Ok,
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Sets the noise knobs: per-pulse phase jitter (radians) and background
/// click probability per gate.
///
/// # Safety
/// `config` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_session_config_set_noise(
    config: *mut HdqkdSessionConfig,
    phase_jitter_rad: f64,
    background_click_prob: f64,
) -> HdqkdStatus {
    guard(|| {
        if config.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        (*config).0.noise.phase_jitter_rad = phase_jitter_rad;
        (*config).0.noise.background_click_prob = background_click_prob;
        match (*config).0.validate() {
            Ok(()) => HdqkdStatus::Ok,
            Err(e) => fail(HdqkdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Runs the full session. Returns NULL on failure (see
/// `hdqkd_last_error_message`).
///
/// # Safety
/// `config` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_session_run(
    config: *const HdqkdSessionConfig,
) -> *mut HdqkdSessionLog {
    if config.is_null() {
        set_error("null pointer");
        return std::ptr::null_mut();
    }
    match catch_unwind(AssertUnwindSafe(|| run_session(&(*config).0))) {
        Ok(Ok(log)) => Box::into_raw(Box::new(HdqkdSessionLog(log))),
        Ok(Err(e)) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `log` must be a handle from `hdqkd_session_run`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_session_log_free(log: *mut HdqkdSessionLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Session log as CSV (`clock,alice_basis,alice_k,bob_basis,bob_k,click`).
/// Free with `hdqkd_string_free`.
///
/// # Safety
/// `log` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_session_log_to_csv(log: *const HdqkdSessionLog) -> *mut c_char {
    if log.is_null() {
        set_error("null pointer");
        return std::ptr::null_mut();
    }
    to_c_string((*log).0.to_csv())
}

/// Basis reconciliation over the log.
///
/// # Safety
/// `log` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_sift(log: *const HdqkdSessionLog) -> *mut HdqkdSiftResult {
    if log.is_null() {
        set_error("null pointer");
        return std::ptr::null_mut();
    }
    match catch_unwind(AssertUnwindSafe(|| sift(&(*log).0))) {
        Ok(Ok(result)) => Box::into_raw(Box::new(HdqkdSiftResult(result))),
        Ok(Err(e)) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `result` must be a handle from `hdqkd_sift`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_sift_result_free(result: *mut HdqkdSiftResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Plain counts of a sift result.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HdqkdSiftCounts {
    pub raw_detections: u64,
    pub sifted_detections: u64,
    pub n_correct: u64,
    pub n_incorrect: u64,
}

/// # Safety
/// `result` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_sift_counts(
    result: *const HdqkdSiftResult,
    out: *mut HdqkdSiftCounts,
) -> HdqkdStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        let r = &(*result).0;
        *out = HdqkdSiftCounts {
            raw_detections: r.raw_detections,
            sifted_detections: r.sifted_detections,
            n_correct: r.n_correct,
            n_incorrect: r.n_incorrect,
        };
        HdqkdStatus::Ok
    })
}

/// Measured QBER; `Undefined` when the sifted set is empty.
///
/// # Safety
/// `result` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_sift_qber(
    result: *const HdqkdSiftResult,
    out: *mut f64,
) -> HdqkdStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        match (*result).0.qber {
            Some(q) => {
                *out = q;
                HdqkdStatus::Ok
            }
            None => fail(HdqkdStatus::Undefined, "QBER of an empty sifted set"),
        }
    })
}

/// Histogram of the correct sifted symbols into `counts[0..dim]`.
///
/// # Safety
/// `result` must be valid; `counts` must point to `len >= dim` writable u64.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_sift_symbol_counts(
    result: *const HdqkdSiftResult,
    counts: *mut u64,
    len: size_t,
) -> HdqkdStatus {
    guard(|| {
        if result.is_null() || counts.is_null() {
            return fail(HdqkdStatus::NullPointer, "null pointer");
        }
        let r = &(*result).0;
        if len < r.dim {
            return fail(
                HdqkdStatus::InvalidArgument,
                format!("buffer holds {len} bins, need {}", r.dim),
            );
        }
        let hist = symbol_counts(r);
        std::ptr::copy_nonoverlapping(hist.as_ptr(), counts, hist.len());
        HdqkdStatus::Ok
    })
}

/// Full security report as a JSON document (thresholds, entropy, rates,
/// verdict). Rates use the logical session duration (cycles at the pulse
/// repetition rate). Free with `hdqkd_string_free`.
///
/// # Safety
/// `result` and `config` must be valid handles.
#[no_mangle]
pub unsafe extern "C" fn hdqkd_security_report_json(
    result: *const HdqkdSiftResult,
    config: *const HdqkdSessionConfig,
) -> *mut c_char {
    if result.is_null() || config.is_null() {
        set_error("null pointer");
        return std::ptr::null_mut();
    }
    let cfg = &(*config).0;
    let hours = logical_wall_hours(cfg.duration_cycles, &cfg.pulse);
    match catch_unwind(AssertUnwindSafe(|| {
        build_report(&(*result).0, &cfg.pulse, hours)
    })) {
        Ok(Ok(report)) => to_c_string(report.to_json()),
        Ok(Err(e)) => {
            set_error(e.to_string());
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}
