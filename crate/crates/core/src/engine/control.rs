use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Lower edge of the parameter box, shared by both gains.
pub const PARAM_LOWER: f64 = 0.0;
/// Upper edge of the parameter box, shared by both gains.
pub const PARAM_UPPER: f64 = 2.0;

/// The tunable controller gains `(k_p, k_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub k_p: f64,
    pub k_s: f64,
}

impl ControllerParams {
    pub fn new(k_p: f64, k_s: f64) -> Self {
        Self { k_p, k_s }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.k_p, self.k_s]
    }

    pub fn in_box(&self) -> bool {
        (PARAM_LOWER..=PARAM_UPPER).contains(&self.k_p) && (PARAM_LOWER..=PARAM_UPPER).contains(&self.k_s)
    }
}

/// Daily errors fed to the control law.
///
/// `glucose` is positive under hyperglycemia (`y_g - r`); `score` is the
/// normalized PHG shortfall `(H - y_s) / H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Errors {
    pub glucose: f64,
    pub score: f64,
}

impl Errors {
    pub fn from_measurements(y_g: f64, y_s: f64, reference: f64, max_score: f64) -> Result<Self> {
        ensure_finite("glucose measurement", y_g)?;
        ensure_finite("score", y_s)?;
        if !(max_score > 0.0) {
            return Err(Error::invalid(format!("max score must be positive, got {max_score}")));
        }
        if !(0.0..=max_score).contains(&y_s) {
            return Err(Error::invalid(format!("score {y_s} outside [0, {max_score}]")));
        }
        Ok(Self {
            glucose: y_g - reference,
            score: (max_score - y_s) / max_score,
        })
    }
}

/// Dose change `k_p / (1 + k_s * e_s) * e_g` in units of insulin.
pub fn control_law(params: ControllerParams, errors: Errors) -> Result<f64> {
    ensure_finite("k_p", params.k_p)?;
    ensure_finite("k_s", params.k_s)?;
    ensure_finite("glucose error", errors.glucose)?;
    ensure_finite("score error", errors.score)?;
    if !(0.0..=1.0).contains(&errors.score) {
        return Err(Error::invalid(format!("score error {} outside [0, 1]", errors.score)));
    }
    let gain = params.k_p / (1.0 + params.k_s * errors.score);
    Ok(gain * errors.glucose)
}

/// New dose, clamped at zero.
pub fn apply_dose(previous_dose: f64, dose_change: f64) -> f64 {
    (previous_dose + dose_change).max(0.0)
}

/// Square-wave dither `amplitude * sign(sin(10 k))` for day `k`.
pub fn dither(day: u64, amplitude: f64) -> f64 {
    let s = (10.0 * day as f64).sin();
    if s < 0.0 {
        -amplitude
    } else {
        amplitude
    }
}
