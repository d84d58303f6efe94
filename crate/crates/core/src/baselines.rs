//! Comparison titrators: the weekly 202 and Step standard-of-care rules and
//! a dose-space extremum-seeking controller (ESC).
//!
//! The ESC is a reconstruction: it regresses the daily glucose cost on the
//! applied dose with an exponentially forgetting RLS and takes a gradient
//! descent step on the nominal dose, probing with a square-wave dither.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::{dither, softmin, Forgetting, RlsState, SOFTMIN_SHARPNESS};
use crate::error::{ensure_finite, Error, Result};

/// Days between standard-of-care adjustments.
pub const WEEKLY_CADENCE: u64 = 7;

/// 202 rule on the last SMBG value: `+2` above 6, `-2` below 3.9, else no change.
pub fn titrate_202(smbg: f64) -> f64 {
    if smbg > 6.0 {
        2.0
    } else if smbg < 3.9 {
        -2.0
    } else {
        0.0
    }
}

/// Step rule on the mean of the last three SMBG values.
pub fn titrate_step(smbg_mean_3day: f64) -> f64 {
    let x = smbg_mean_3day;
    if x > 9.0 {
        8.0
    } else if x >= 8.0 {
        6.0
    } else if x >= 7.0 {
        4.0
    } else if x >= 5.0 {
        2.0
    } else if x >= 3.9 {
        0.0
    } else if x >= 3.1 {
        -2.0
    } else {
        -4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeeklyRule {
    #[serde(rename = "202")]
    Rule202,
    #[serde(rename = "step")]
    Step,
}

/// A weekly standard-of-care titrator.
#[derive(Debug, Clone)]
pub struct StandardOfCare {
    rule: WeeklyRule,
    recent: VecDeque<f64>,
    dose: f64,
}

impl StandardOfCare {
    pub fn new(rule: WeeklyRule, initial_dose: f64) -> Self {
        Self { rule, recent: VecDeque::with_capacity(3), dose: initial_dose.max(0.0) }
    }

    pub fn rule(&self) -> WeeklyRule {
        self.rule
    }

    pub fn dose(&self) -> f64 {
        self.dose
    }

    /// Records day `day`'s SMBG value and returns the dose for that day.
    pub fn step(&mut self, day: u64, smbg: f64) -> Result<f64> {
        ensure_finite("SMBG", smbg)?;
        if self.recent.len() == 3 {
            self.recent.pop_front();
        }
        self.recent.push_back(smbg);
        if day > 0 && day.is_multiple_of(WEEKLY_CADENCE) {
            let change = match self.rule {
                WeeklyRule::Rule202 => titrate_202(smbg),
                WeeklyRule::Step if self.recent.len() == 3 => titrate_step(self.recent.iter().sum::<f64>() / 3.0),
                WeeklyRule::Step => 0.0,
            };
            self.dose = (self.dose + change).max(0.0);
        }
        Ok(self.dose)
    }
}

/// Constants of the extremum-seeking baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EscConfig {
    /// Gradient step on the nominal dose, U per unit cost gradient.
    pub gain: f64,
    /// Square-wave dither added to the applied dose, U.
    pub dither_amplitude: f64,
    pub max_dose: f64,
    pub reference: f64,
    pub forgetting_factor: f64,
    pub initial_dose: f64,
}

impl Default for EscConfig {
    fn default() -> Self {
        Self {
            gain: 20.0,
            dither_amplitude: 0.5,
            max_dose: 300.0,
            reference: 5.0,
            forgetting_factor: 0.9,
            initial_dose: 5.0,
        }
    }
}

impl EscConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0 && self.dither_amplitude >= 0.0 && self.initial_dose >= 0.0) {
            return Err(Error::Config("ESC gain, dither and initial dose must be non-negative".into()));
        }
        if !(self.max_dose > 0.0 && self.reference > 0.0) {
            return Err(Error::Config("ESC max dose and reference must be positive".into()));
        }
        if !(self.forgetting_factor > 0.0 && self.forgetting_factor <= 1.0) {
            return Err(Error::Config(format!("ESC forgetting factor {} outside (0, 1]", self.forgetting_factor)));
        }
        Ok(())
    }
}

/// Glucose-only cost used by the ESC.
pub fn esc_cost(smbg: f64, reference: f64) -> f64 {
    let e = smbg - reference;
    (e / reference).powi(2) + 10.0 * softmin(e, 0.0, SOFTMIN_SHARPNESS).powi(2)
}

/// Dose-space extremum-seeking controller.
#[derive(Debug, Clone)]
pub struct EscController {
    config: EscConfig,
    rls: RlsState,
    nominal: f64,
    applied: f64,
    day: u64,
    max_cond: f64,
}

impl EscController {
    pub fn new(config: EscConfig) -> Result<Self> {
        config.validate()?;
        let rls = RlsState::new(2, config.forgetting_factor, 0.0, Forgetting::Exponential)?;
        Ok(Self {
            max_cond: rls.condition_number(),
            rls,
            nominal: config.initial_dose,
            applied: config.initial_dose,
            day: 0,
            config,
        })
    }

    pub fn config(&self) -> &EscConfig {
        &self.config
    }

    pub fn nominal_dose(&self) -> f64 {
        self.nominal
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    pub fn max_condition_number(&self) -> f64 {
        self.max_cond
    }

    /// Consumes today's SMBG value, measured under yesterday's applied
    /// dose, and returns today's dose.
    pub fn step(&mut self, smbg: f64) -> Result<f64> {
        ensure_finite("SMBG", smbg)?;
        self.day += 1;
        let z = esc_cost(smbg, self.config.reference);
        let gradient = self.rls.update(&[self.applied, 1.0], z)?[0];
        self.max_cond = self.max_cond.max(self.rls.condition_number());
        self.nominal = (self.nominal - self.config.gain * gradient).clamp(0.0, self.config.max_dose);
        self.applied = (self.nominal + dither(self.day, self.config.dither_amplitude)).max(0.0);
        Ok(self.applied)
    }
}
