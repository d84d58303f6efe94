use serde::{Deserialize, Serialize};

use super::control::{apply_dose, control_law, dither, ControllerParams, Errors, PARAM_LOWER, PARAM_UPPER};
use super::cost::{cost_from_errors, smoothing_cost, smoothing_cost_gradient, CostBreakdown};
use super::optimizer::{project, AdaBeliefConfig, AdaOsState};
use super::rls::{Forgetting, RlsState};
use crate::error::{Error, Result};

/// Everything needed to start a titration engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Glucose reference in mmol/L.
    pub reference: f64,
    /// Maximum PHG score.
    pub max_score: f64,
    pub kp0: f64,
    pub ks0: f64,
    /// Keep `k_s` at `ks0` and tune `k_p` alone.
    pub freeze_ks: bool,
    pub forgetting_factor: f64,
    pub eps_phi: f64,
    pub dither_amplitude: f64,
    pub initial_dose: f64,
    pub optimizer: AdaBeliefConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            reference: 5.5,
            max_score: 10.0,
            kp0: 0.3,
            ks0: 1.0,
            freeze_ks: false,
            forgetting_factor: 0.9,
            eps_phi: 1e-3,
            dither_amplitude: 0.01,
            initial_dose: 0.0,
            optimizer: AdaBeliefConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("reference", self.reference), ("max_score", self.max_score)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let initial = ControllerParams::new(self.kp0, self.ks0);
        if !initial.in_box() {
            return Err(Error::Config(format!(
                "initial gains ({}, {}) outside [{PARAM_LOWER}, {PARAM_UPPER}]^2",
                self.kp0, self.ks0
            )));
        }
        if !(self.forgetting_factor > 0.0 && self.forgetting_factor <= 1.0) {
            return Err(Error::Config(format!("forgetting factor {} outside (0, 1]", self.forgetting_factor)));
        }
        if !(self.eps_phi >= 0.0) || !(self.dither_amplitude >= 0.0) || !(self.initial_dose >= 0.0) {
            return Err(Error::Config("eps_phi, dither amplitude and initial dose must be non-negative".into()));
        }
        self.optimizer.validate()
    }

    fn tuned_dim(&self) -> usize {
        if self.freeze_ks {
            1
        } else {
            2
        }
    }
}

/// One day of titration as logged by the engine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayRecord {
    pub day: u64,
    pub y_g: f64,
    pub y_s: f64,
    pub cost: CostBreakdown,
    /// Gradient estimate fed to the optimizer (RLS part plus smoothing term).
    pub gradient: Vec<f64>,
    /// Nominal gains after the optimizer step.
    pub theta_hat: ControllerParams,
    /// Dithered gains actually used by the control law.
    pub theta_applied: ControllerParams,
    pub dose_change: f64,
    pub dose: f64,
    pub cond_p: f64,
}

/// The AdaOS loop for one subject.
///
/// Each call to [`TitrationEngine::step`] consumes the day's SMBG value and
/// PHG score, refits the local cost model at the gains applied the day
/// before, takes one projected AdaBelief step and returns the new dose.
#[derive(Debug, Clone)]
pub struct TitrationEngine {
    config: EngineConfig,
    rls: RlsState,
    optimizer: AdaOsState,
    /// θ̂(k-1)
    theta_hat: Vec<f64>,
    /// θ̂(k-2)
    theta_hat_prev: Vec<f64>,
    /// θ̃(k-1), the gains that produced today's measurements.
    theta_applied: Vec<f64>,
    dose: f64,
    day: u64,
    max_cond: f64,
}

impl TitrationEngine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.tuned_dim();
        let theta0 = if config.freeze_ks { vec![config.kp0] } else { vec![config.kp0, config.ks0] };
        let rls = RlsState::new(dim + 1, config.forgetting_factor, config.eps_phi, Forgetting::Directional)?;
        let cond = rls.condition_number();
        Ok(Self {
            optimizer: AdaOsState::new(dim, config.optimizer),
            rls,
            theta_hat_prev: theta0.clone(),
            theta_applied: theta0.clone(),
            theta_hat: theta0,
            dose: config.initial_dose,
            day: 0,
            max_cond: cond,
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn day(&self) -> u64 {
        self.day
    }

    pub fn dose(&self) -> f64 {
        self.dose
    }

    pub fn rls(&self) -> &RlsState {
        &self.rls
    }

    pub fn optimizer(&self) -> &AdaOsState {
        &self.optimizer
    }

    /// Largest covariance condition number seen so far.
    pub fn max_condition_number(&self) -> f64 {
        self.max_cond
    }

    pub fn theta_hat(&self) -> ControllerParams {
        self.to_params(&self.theta_hat)
    }

    pub fn theta_applied(&self) -> ControllerParams {
        self.to_params(&self.theta_applied)
    }

    fn to_params(&self, theta: &[f64]) -> ControllerParams {
        match theta {
            [k_p] => ControllerParams::new(*k_p, self.config.ks0),
            [k_p, k_s] => ControllerParams::new(*k_p, *k_s),
            _ => unreachable!("engine tunes one or two gains"),
        }
    }

    /// Runs day `k` on the measurements taken that morning.
    pub fn step(&mut self, y_g: f64, y_s: f64) -> Result<DayRecord> {
        let errors = Errors::from_measurements(y_g, y_s, self.config.reference, self.config.max_score)?;
        let cost = cost_from_errors(errors, self.config.reference);
        self.advance(y_g, y_s, errors, cost)
    }

    fn advance(&mut self, y_g: f64, y_s: f64, errors: Errors, mut cost: CostBreakdown) -> Result<DayRecord> {
        let z = cost.total;

        let mut phi = self.theta_applied.clone();
        phi.push(1.0);
        let g_z = self.rls.update(&phi, z)?;
        self.max_cond = self.max_cond.max(self.rls.condition_number());

        let smoothing = smoothing_cost_gradient(&self.theta_hat, &self.theta_hat_prev);
        cost.c_theta = smoothing_cost(&self.theta_hat, &self.theta_hat_prev);
        cost.total += cost.c_theta;
        let gradient: Vec<f64> = g_z.iter().zip(&smoothing).map(|(a, b)| a + b).collect();

        let theta_new = self.optimizer.step(&gradient, &self.theta_hat, PARAM_LOWER, PARAM_UPPER)?;
        let day = self.day.checked_add(1).ok_or_else(|| Error::invalid("day counter overflow"))?;
        let offset = dither(day, self.config.dither_amplitude);
        let dithered: Vec<f64> = theta_new.iter().map(|t| t + offset).collect();
        let ones = vec![1.0; dithered.len()];
        let applied = project(&dithered, &ones, PARAM_LOWER, PARAM_UPPER);

        self.day = day;
        self.theta_hat_prev = std::mem::replace(&mut self.theta_hat, theta_new);
        self.theta_applied = applied;

        let params = self.theta_applied();
        let dose_change = control_law(params, errors)?;
        self.dose = apply_dose(self.dose, dose_change);

        Ok(DayRecord {
            day,
            y_g,
            y_s,
            cost,
            gradient,
            theta_hat: self.theta_hat(),
            theta_applied: params,
            dose_change,
            dose: self.dose,
            cond_p: self.rls.condition_number(),
        })
    }
}
