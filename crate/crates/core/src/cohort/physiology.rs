use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::meals::{MealSchedule, PoissonMeals};
use super::params::{ModelFamily, RngPurpose, SubjectParams};
use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u64 = 1440;
/// 05:45, before the earliest scheduled breakfast.
pub const FASTING_MINUTE: u64 = 5 * 60 + 45;
/// 21:00.
pub const INJECTION_MINUTE: u64 = 21 * 60;
/// Glucose is reflected at this level (mmol/L).
pub const BG_FLOOR: f64 = 1.0;

/// Fixed constants of the continuous-time models. Rates are per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysioConstants {
    /// Insulin-independent glucose clearance.
    pub s_g: f64,
    /// Plasma insulin clearance.
    pub k_i: f64,
    /// Absorption rate of the long-acting depot.
    pub k_abs: f64,
    /// Distribution volume scaling injected units into plasma insulin.
    pub v_i: f64,
    /// Poisson meal intensity between 07:00 and 23:00, meals per day.
    pub meal_rate_day: f64,
    /// Poisson meal intensity overnight, meals per day.
    pub meal_rate_night: f64,
    /// Bounds of the uniform glucose jump per `M2` meal, mmol/L.
    pub meal_jump: [f64; 2],
    /// Remote-effect rate used for every `M3` subject.
    pub m3_effect_rate: f64,
    /// Insulin sensitivity scaled by `c4` in `M3`.
    pub m3_sensitivity_ref: f64,
    /// Gut absorption time constant in minutes.
    pub gut_time_constant_min: f64,
    /// Glucose appearance per gram of carbohydrate, mmol/L.
    pub carb_gain: f64,
    /// Insulin secreted per unit of glucose appearance from the gut.
    pub incretin_gain: f64,
}

impl Default for PhysioConstants {
    fn default() -> Self {
        Self {
            s_g: 1.4,
            k_i: 15.0,
            k_abs: 1.2,
            v_i: 0.7,
            meal_rate_day: 3.0,
            meal_rate_night: 0.1,
            meal_jump: [1.0, 4.0],
            m3_effect_rate: 2.0,
            m3_sensitivity_ref: 1.0,
            gut_time_constant_min: 40.0,
            carb_gain: 0.1,
            incretin_gain: 0.1,
        }
    }
}

impl PhysioConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s_g", self.s_g),
            ("k_i", self.k_i),
            ("k_abs", self.k_abs),
            ("v_i", self.v_i),
            ("m3_effect_rate", self.m3_effect_rate),
            ("m3_sensitivity_ref", self.m3_sensitivity_ref),
            ("gut_time_constant_min", self.gut_time_constant_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("meal_rate_day", self.meal_rate_day),
            ("meal_rate_night", self.meal_rate_night),
            ("carb_gain", self.carb_gain),
            ("incretin_gain", self.incretin_gain),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.meal_jump[0] > 0.0 && self.meal_jump[0] <= self.meal_jump[1]) {
            return Err(Error::Config(format!("meal jump bounds {:?} invalid", self.meal_jump)));
        }
        Ok(())
    }
}

/// Physiological state of a continuous-time subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysioState {
    /// Blood glucose, mmol/L.
    pub x_g: f64,
    /// Remote insulin effect.
    pub x_e: f64,
    /// Plasma insulin.
    pub x_i: f64,
    /// Subcutaneous long-acting depot, U.
    pub x_sc: f64,
    /// Unabsorbed meal glucose in the gut, mmol/L equivalent.
    pub x_gut: f64,
    /// Simulation clock in minutes.
    pub t_min: u64,
}

/// Fills in the parameters that make `x_g0` an equilibrium without insulin
/// and returns the matching state.
pub fn calibrate_stationary(params: &mut SubjectParams, c: &PhysioConstants) -> Result<PhysioState> {
    match params.family {
        ModelFamily::M1 => return Err(Error::invalid("M1 subjects have no continuous-time state")),
        ModelFamily::M2 => {
            params.x_i0 = params.p7 / c.k_i * params.x_g0;
        }
        ModelFamily::M3 => {
            params.p7 = c.k_i * params.x_i0 / params.x_g0;
        }
    }
    let x_e0 = params.x_i0;
    params.p6 = c.s_g * params.x_g0 + params.p4 * x_e0 * params.x_g0;
    if !(params.p6 > 0.0) {
        return Err(Error::Numerical(format!("infeasible calibration, p6 = {}", params.p6)));
    }
    Ok(PhysioState { x_g: params.x_g0, x_e: x_e0, x_i: params.x_i0, x_sc: 0.0, x_gut: 0.0, t_min: 0 })
}

/// Time derivatives per day of `(x_g, x_e, x_i, x_sc, x_gut)`.
pub fn drift(s: &PhysioState, p: &SubjectParams, c: &PhysioConstants) -> [f64; 5] {
    let tau_gut = c.gut_time_constant_min / MINUTES_PER_DAY as f64;
    let appearance = s.x_gut / tau_gut;
    let absorbed = c.k_abs * s.x_sc;
    [
        p.p6 - c.s_g * s.x_g - p.p4 * s.x_e * s.x_g + appearance,
        p.p1 * (s.x_i - s.x_e),
        -c.k_i * s.x_i + p.p7 * s.x_g + absorbed / c.v_i + p.secretion_multiplier() * c.incretin_gain * appearance,
        -absorbed,
        -appearance,
    ]
}

/// Exogenous inputs arriving during one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInputs {
    /// Injected long-acting insulin, U.
    pub dose: f64,
    /// Direct glucose jump, mmol/L.
    pub glucose_jump: f64,
    /// Carbohydrates entering the gut, g.
    pub carbs: f64,
}

/// One Euler–Maruyama step of `dt_min` minutes; `noise` is a standard normal
/// draw for the glucose diffusion.
pub fn step_physiology(
    state: &PhysioState,
    params: &SubjectParams,
    c: &PhysioConstants,
    dt_min: u64,
    inputs: StepInputs,
    noise: f64,
) -> Result<PhysioState> {
    if !(1..=10).contains(&dt_min) {
        return Err(Error::invalid(format!("time step {dt_min} min outside 1..=10")));
    }
    let dt = dt_min as f64 / MINUTES_PER_DAY as f64;
    let d = drift(state, params, c);
    let mut next = PhysioState {
        x_g: state.x_g + d[0] * dt + params.sigma_g * dt.sqrt() * noise + inputs.glucose_jump,
        x_e: state.x_e + d[1] * dt,
        x_i: state.x_i + d[2] * dt,
        x_sc: state.x_sc + d[3] * dt + inputs.dose,
        x_gut: state.x_gut + d[4] * dt + params.absorption_multiplier() * c.carb_gain * inputs.carbs,
        t_min: state.t_min + dt_min,
    };
    let values = [next.x_g, next.x_e, next.x_i, next.x_sc, next.x_gut];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite state at t = {} min: {next:?} (from {state:?}, inputs {inputs:?})",
            next.t_min
        )));
    }
    if next.x_g < BG_FLOOR {
        next.x_g = (2.0 * BG_FLOOR - next.x_g).max(BG_FLOOR);
    }
    next.x_sc = next.x_sc.max(0.0);
    next.x_gut = next.x_gut.max(0.0);
    Ok(next)
}

#[derive(Debug, Clone)]
enum MealSource {
    None,
    Poisson(PoissonMeals),
    Scheduled(Option<MealSchedule>),
}

/// A continuous-time subject with its own noise stream and meal process.
#[derive(Debug, Clone)]
pub struct VirtualSubject {
    params: SubjectParams,
    constants: PhysioConstants,
    state: PhysioState,
    dt_min: u64,
    diffusion: bool,
    meals: MealSource,
    pending_dose: f64,
    rng: ChaCha8Rng,
}

impl VirtualSubject {
    /// A calibrated subject at `t = 0` (midnight of day one).
    pub fn new(params: SubjectParams, constants: PhysioConstants, dt_min: u64) -> Result<Self> {
        Self::with_options(params, constants, dt_min, true, true)
    }

    pub fn with_options(
        mut params: SubjectParams,
        constants: PhysioConstants,
        dt_min: u64,
        diffusion: bool,
        meals: bool,
    ) -> Result<Self> {
        if !(1..=10).contains(&dt_min) || !MINUTES_PER_DAY.is_multiple_of(dt_min) || !FASTING_MINUTE.is_multiple_of(dt_min) {
            return Err(Error::Config(format!("time step {dt_min} min must divide 05:45 and lie in 1..=10")));
        }
        let state = calibrate_stationary(&mut params, &constants)?;
        let meals = match (meals, params.family) {
            (false, _) => MealSource::None,
            (true, ModelFamily::M2) => MealSource::Poisson(PoissonMeals::new(&constants, dt_min)?),
            (true, ModelFamily::M3) => MealSource::Scheduled(None),
            (true, ModelFamily::M1) => unreachable!("calibration rejects M1"),
        };
        let rng = RngPurpose::Physiology.rng(params.rng_seed);
        Ok(Self { params, constants, state, dt_min, diffusion, meals, pending_dose: 0.0, rng })
    }

    pub fn params(&self) -> &SubjectParams {
        &self.params
    }

    pub fn state(&self) -> &PhysioState {
        &self.state
    }

    pub fn bg(&self) -> f64 {
        self.state.x_g
    }

    pub fn dt_min(&self) -> u64 {
        self.dt_min
    }

    /// Queues a dose for the next step.
    pub fn inject(&mut self, units: f64) {
        self.pending_dose += units.max(0.0);
    }

    /// Steps until the clock reaches `t_min`, reporting glucose after every step.
    pub fn advance_to(&mut self, t_min: u64, mut on_sample: impl FnMut(f64)) -> Result<()> {
        while self.state.t_min < t_min {
            self.step_once()?;
            on_sample(self.state.x_g);
        }
        Ok(())
    }

    fn step_once(&mut self) -> Result<()> {
        let t = self.state.t_min;
        let mut inputs = StepInputs { dose: std::mem::take(&mut self.pending_dose), ..Default::default() };
        match &mut self.meals {
            MealSource::None => {}
            MealSource::Poisson(p) => {
                inputs.glucose_jump = p.jump_during(t, &mut self.rng);
            }
            MealSource::Scheduled(schedule) => {
                let day = t / MINUTES_PER_DAY;
                if schedule.as_ref().is_none_or(|s| s.day != day) {
                    *schedule = Some(MealSchedule::draw(day, &mut self.rng));
                }
                let s = schedule.as_ref().expect("schedule drawn above");
                inputs.carbs = s.carbs_during(t, self.dt_min);
            }
        }
        let noise: f64 = if self.diffusion { self.rng.sample(StandardNormal) } else { 0.0 };
        self.state = step_physiology(&self.state, &self.params, &self.constants, self.dt_min, inputs, noise)?;
        Ok(())
    }
}

/// Fasting glucose after `days` days of a constant evening dose, without
/// noise or meals.
pub fn steady_state_fbg(params: &SubjectParams, constants: &PhysioConstants, dose: f64, days: u64) -> Result<f64> {
    let mut subject = VirtualSubject::with_options(params.clone(), constants.clone(), 5, false, false)?;
    let mut fbg = subject.bg();
    for day in 0..days {
        let start = day * MINUTES_PER_DAY;
        subject.advance_to(start + FASTING_MINUTE, |_| {})?;
        fbg = subject.bg();
        subject.advance_to(start + INJECTION_MINUTE, |_| {})?;
        subject.inject(dose);
        subject.advance_to(start + MINUTES_PER_DAY, |_| {})?;
    }
    Ok(fbg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{sample_subject, subject_seed};

    fn subject(family: ModelFamily, i: usize) -> SubjectParams {
        sample_subject(family, subject_seed(17, i), None, &PhysioConstants::default()).unwrap()
    }

    #[test]
    fn calibrated_drift_is_zero() {
        let c = PhysioConstants::default();
        for family in [ModelFamily::M2, ModelFamily::M3] {
            for i in 0..50 {
                let mut p = subject(family, i);
                let s = calibrate_stationary(&mut p, &c).unwrap();
                for (j, d) in drift(&s, &p, &c).iter().enumerate() {
                    assert!(d.abs() < 1e-12, "{family:?} coordinate {j} drift {d}");
                }
                if family == ModelFamily::M2 {
                    assert!((s.x_i - p.p7 / c.k_i * p.x_g0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fixed_point_without_inputs() {
        let p = subject(ModelFamily::M2, 0);
        let c = PhysioConstants::default();
        let mut sim = VirtualSubject::with_options(p.clone(), c, 5, false, false).unwrap();
        let mut worst: f64 = 0.0;
        sim.advance_to(30 * MINUTES_PER_DAY, |bg| worst = worst.max((bg - p.x_g0).abs())).unwrap();
        assert!(worst < 1e-6, "drifted by {worst}");
    }

    #[test]
    fn rejects_bad_time_step() {
        let p = subject(ModelFamily::M2, 0);
        let c = PhysioConstants::default();
        let s = calibrate_stationary(&mut p.clone(), &c).unwrap();
        assert!(step_physiology(&s, &p, &c, 0, StepInputs::default(), 0.0).is_err());
        assert!(step_physiology(&s, &p, &c, 11, StepInputs::default(), 0.0).is_err());
        assert!(VirtualSubject::new(p, c, 7).is_err());
    }

    #[test]
    fn reflects_at_floor() {
        let p = subject(ModelFamily::M2, 1);
        let c = PhysioConstants::default();
        let mut s = calibrate_stationary(&mut p.clone(), &c).unwrap();
        s.x_g = 1.05;
        let next = step_physiology(&s, &p, &c, 5, StepInputs::default(), -50.0).unwrap();
        assert!(next.x_g >= BG_FLOOR);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let p = subject(ModelFamily::M2, 1);
        let c = PhysioConstants::default();
        let s = calibrate_stationary(&mut p.clone(), &c).unwrap();
        let err = step_physiology(&s, &p, &c, 5, StepInputs { dose: f64::NAN, ..Default::default() }, 0.0);
        assert!(matches!(err, Err(Error::Numerical(_))));
    }
}
