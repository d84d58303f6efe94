use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::params::{RngPurpose, SubjectParams};
use crate::error::{Error, Result};

/// Constants of the daily fasting-glucose model.
///
/// `FBG(k+1) = FBG(k) + a (FBG_ss(u) - FBG(k)) + w`, with
/// `FBG_ss(u) = max(p_EGP / clearance - sensitivity * u, floor)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DailyConstants {
    /// Fraction of the gap to steady state closed per day.
    pub response_rate: f64,
    pub clearance: f64,
    /// FBG lowering per unit of daily insulin, mmol/L/U.
    pub sensitivity: f64,
    pub floor: f64,
    /// Standard deviation of the daily process noise, mmol/L.
    pub process_noise: f64,
    pub initial_fbg: f64,
}

impl Default for DailyConstants {
    fn default() -> Self {
        Self {
            response_rate: 0.4,
            // p_EGP = 200 without insulin sits at 12 mmol/L
            clearance: 200.0 / 12.0,
            sensitivity: 0.1,
            floor: 2.0,
            process_noise: 0.15,
            initial_fbg: 12.0,
        }
    }
}

impl DailyConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.response_rate > 0.0 && self.response_rate <= 1.0) {
            return Err(Error::Config(format!("response rate {} outside (0, 1]", self.response_rate)));
        }
        for (name, v) in [("clearance", self.clearance), ("sensitivity", self.sensitivity), ("initial_fbg", self.initial_fbg)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.process_noise >= 0.0) || !(self.floor >= 0.0) {
            return Err(Error::Config("process noise and floor must be non-negative".into()));
        }
        Ok(())
    }
}

/// A subject of the daily model.
#[derive(Debug, Clone)]
pub struct DailySubject {
    p_egp: f64,
    constants: DailyConstants,
    fbg: f64,
    rng: ChaCha8Rng,
}

impl DailySubject {
    pub fn new(params: &SubjectParams, constants: DailyConstants) -> Result<Self> {
        let p_egp = params.p_egp.ok_or_else(|| Error::invalid("daily model needs p_EGP"))?;
        Ok(Self {
            p_egp,
            fbg: constants.initial_fbg,
            rng: RngPurpose::Physiology.rng(params.rng_seed),
            constants,
        })
    }

    pub fn fbg(&self) -> f64 {
        self.fbg
    }

    pub fn steady_state(&self, dose: f64) -> f64 {
        (self.p_egp / self.constants.clearance - self.constants.sensitivity * dose).max(self.constants.floor)
    }

    /// Applies the day's dose and moves to the next morning.
    pub fn advance_day(&mut self, dose: f64) -> Result<f64> {
        let noise: f64 = self.rng.sample(StandardNormal);
        let c = &self.constants;
        let next = self.fbg + c.response_rate * (self.steady_state(dose) - self.fbg) + c.process_noise * noise;
        if !next.is_finite() {
            return Err(Error::Numerical(format!("non-finite fasting glucose after dose {dose}")));
        }
        self.fbg = if next < c.floor.min(1.0) { 2.0 * c.floor.min(1.0) - next } else { next };
        Ok(self.fbg)
    }
}
