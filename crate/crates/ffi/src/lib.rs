//! C interface to the AdaOS titration engine.
//!
//! Engines are opaque heap handles created by `adaos_engine_new` and released
//! with `adaos_engine_free`. Fallible calls return an `AdaosStatus`; the text
//! of the most recent failure on the calling thread is available from
//! `adaos_last_error_message`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adaos::engine::{
    control_law, softmin, AdaBeliefConfig, ControllerParams, EngineConfig, Errors, TitrationEngine,
};
use adaos::sensors::{phg_sigmoid, smbg_sigma, SmbgParams};
use adaos::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    Numerical = 4,
    Panic = 5,
}

/// Engine settings. Start from `adaos_engine_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdaosEngineConfig {
    /// Glucose reference, mmol/L.
    pub reference: f64,
    pub max_score: f64,
    pub kp0: f64,
    pub ks0: f64,
    /// Nonzero keeps `k_s` at `ks0`.
    pub freeze_ks: u8,
    pub forgetting_factor: f64,
    pub eps_phi: f64,
    pub dither_amplitude: f64,
    pub initial_dose: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&EngineConfig> for AdaosEngineConfig {
    fn from(c: &EngineConfig) -> Self {
        Self {
            reference: c.reference,
            max_score: c.max_score,
            kp0: c.kp0,
            ks0: c.ks0,
            freeze_ks: c.freeze_ks as u8,
            forgetting_factor: c.forgetting_factor,
            eps_phi: c.eps_phi,
            dither_amplitude: c.dither_amplitude,
            initial_dose: c.initial_dose,
            alpha: c.optimizer.alpha,
            beta1: c.optimizer.beta1,
            beta2: c.optimizer.beta2,
            eps: c.optimizer.eps,
        }
    }
}

impl From<&AdaosEngineConfig> for EngineConfig {
    fn from(c: &AdaosEngineConfig) -> Self {
        Self {
            reference: c.reference,
            max_score: c.max_score,
            kp0: c.kp0,
            ks0: c.ks0,
            freeze_ks: c.freeze_ks != 0,
            forgetting_factor: c.forgetting_factor,
            eps_phi: c.eps_phi,
            dither_amplitude: c.dither_amplitude,
            initial_dose: c.initial_dose,
            optimizer: AdaBeliefConfig { alpha: c.alpha, beta1: c.beta1, beta2: c.beta2, eps: c.eps },
        }
    }
}

/// One titration day as seen from C.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AdaosDayResult {
    pub day: u64,
    pub dose: f64,
    pub dose_change: f64,
    pub k_p_hat: f64,
    pub k_s_hat: f64,
    pub k_p_applied: f64,
    pub k_s_applied: f64,
    pub cost_total: f64,
    pub cond_p: f64,
}

/// Opaque engine handle.
pub struct AdaosEngine {
    inner: TitrationEngine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    // interior NULs would truncate the message; replace them
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> AdaosStatus {
    match err {
        Error::InvalidInput(_) => AdaosStatus::InvalidInput,
        Error::Config(_) => AdaosStatus::InvalidConfig,
        _ => AdaosStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guarded(f: impl FnOnce() -> Result<(), (AdaosStatus, String)>) -> AdaosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdaosStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            AdaosStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (AdaosStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (AdaosStatus, String) {
    (AdaosStatus::NullPointer, format!("{name} is null"))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adaos_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn adaos_engine_config_default() -> AdaosEngineConfig {
    AdaosEngineConfig::from(&EngineConfig::default())
}

/// Creates an engine. On success `*out` owns a handle for
/// `adaos_engine_free`; on failure it is set to null.
///
/// # Safety
/// `config` must be null or point to a valid config; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn adaos_engine_new(config: *const AdaosEngineConfig, out: *mut *mut AdaosEngine) -> AdaosStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let config = config.as_ref().ok_or_else(|| null("config"))?;
        let inner = TitrationEngine::new(EngineConfig::from(config)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(AdaosEngine { inner }));
        Ok(())
    })
}

/// Feeds one day's SMBG value (mmol/L) and PHG score and writes the new dose.
/// Invalid measurements are rejected without touching the engine; after a
/// numerical failure its state is unspecified.
///
/// # Safety
/// `engine` must come from `adaos_engine_new`; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn adaos_engine_step(
    engine: *mut AdaosEngine,
    y_g: f64,
    y_s: f64,
    out: *mut AdaosDayResult,
) -> AdaosStatus {
    guarded(|| {
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let rec = engine.inner.step(y_g, y_s).map_err(lib_err)?;
        *out = AdaosDayResult {
            day: rec.day,
            dose: rec.dose,
            dose_change: rec.dose_change,
            k_p_hat: rec.theta_hat.k_p,
            k_s_hat: rec.theta_hat.k_s,
            k_p_applied: rec.theta_applied.k_p,
            k_s_applied: rec.theta_applied.k_s,
            cost_total: rec.cost.total,
            cond_p: rec.cond_p,
        };
        Ok(())
    })
}

/// Current dose in units.
///
/// # Safety
/// `engine` must come from `adaos_engine_new`; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn adaos_engine_dose(engine: *const AdaosEngine, out: *mut f64) -> AdaosStatus {
    guarded(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = engine.inner.dose();
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or come from `adaos_engine_new`, and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adaos_engine_free(engine: *mut AdaosEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Dose change `k_p / (1 + k_s e_s) e_g` for one measurement pair.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn adaos_control_law(
    k_p: f64,
    k_s: f64,
    y_g: f64,
    y_s: f64,
    reference: f64,
    max_score: f64,
    out: *mut f64,
) -> AdaosStatus {
    guarded(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let errors = Errors::from_measurements(y_g, y_s, reference, max_score).map_err(lib_err)?;
        *out = control_law(ControllerParams::new(k_p, k_s), errors).map_err(lib_err)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn adaos_softmin(x1: f64, x2: f64, a: f64) -> f64 {
    softmin(x1, x2, a)
}

/// SMBG error standard deviation at glucose `x_g` with the default meter.
#[no_mangle]
pub extern "C" fn adaos_smbg_sigma(x_g: f64) -> f64 {
    smbg_sigma(x_g, &SmbgParams::default())
}

#[no_mangle]
pub extern "C" fn adaos_phg_sigmoid(x: f64, rho: f64, d: f64) -> f64 {
    phg_sigmoid(x, rho, d)
}
