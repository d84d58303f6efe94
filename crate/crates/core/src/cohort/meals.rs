use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Uniform};
use serde::Serialize;

use super::physiology::{PhysioConstants, MINUTES_PER_DAY};
use crate::error::{Error, Result};

const DAY_WINDOW: std::ops::Range<u64> = 7 * 60..23 * 60;

/// A meal at an absolute simulation minute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MealEvent {
    pub time_min: f64,
    /// Carbohydrates in grams.
    pub carbs: f64,
}

/// Poisson meal arrivals with a day and a night intensity, each meal a
/// uniform glucose jump.
#[derive(Debug, Clone)]
pub struct PoissonMeals {
    day: Option<Poisson<f64>>,
    night: Option<Poisson<f64>>,
    jump: Uniform<f64>,
}

impl PoissonMeals {
    pub fn new(c: &PhysioConstants, dt_min: u64) -> Result<Self> {
        let dt = dt_min as f64 / MINUTES_PER_DAY as f64;
        let counts = |rate: f64| -> Result<Option<Poisson<f64>>> {
            if rate == 0.0 {
                return Ok(None);
            }
            Poisson::new(rate * dt).map(Some).map_err(|e| Error::Config(format!("meal rate {rate}: {e}")))
        };
        let jump = Uniform::new_inclusive(c.meal_jump[0], c.meal_jump[1])
            .map_err(|e| Error::Config(format!("meal jump bounds: {e}")))?;
        Ok(Self { day: counts(c.meal_rate_day)?, night: counts(c.meal_rate_night)?, jump })
    }

    /// Number of meals arriving in the step starting at minute `t`.
    pub fn count_during(&self, t: u64, rng: &mut ChaCha8Rng) -> u64 {
        let dist = if DAY_WINDOW.contains(&(t % MINUTES_PER_DAY)) { &self.day } else { &self.night };
        dist.as_ref().map_or(0, |d| d.sample(rng) as u64)
    }

    /// Total glucose jump of the meals arriving in the step starting at `t`.
    pub fn jump_during(&self, t: u64, rng: &mut ChaCha8Rng) -> f64 {
        let n = self.count_during(t, rng);
        (0..n).map(|_| self.jump.sample(rng)).sum()
    }
}

/// Breakfast, lunch and dinner of one day.
#[derive(Debug, Clone, PartialEq)]
pub struct MealSchedule {
    pub day: u64,
    pub meals: [MealEvent; 3],
}

impl MealSchedule {
    /// Breakfast at U(6,8) h with U(10,25) g, lunch at U(12,14) h with
    /// U(20,30) g and dinner at U(19,20) h with U(25,45) g.
    pub fn draw(day: u64, rng: &mut ChaCha8Rng) -> Self {
        let base = (day * MINUTES_PER_DAY) as f64;
        let mut meal = |hours: (f64, f64), carbs: (f64, f64)| MealEvent {
            time_min: base + 60.0 * rng.random_range(hours.0..hours.1),
            carbs: rng.random_range(carbs.0..carbs.1),
        };
        let breakfast = meal((6.0, 8.0), (10.0, 25.0));
        let lunch = meal((12.0, 14.0), (20.0, 30.0));
        let dinner = meal((19.0, 20.0), (25.0, 45.0));
        Self { day, meals: [breakfast, lunch, dinner] }
    }

    /// Carbohydrates of meals falling in `[t, t + dt)`.
    pub fn carbs_during(&self, t: u64, dt_min: u64) -> f64 {
        let (lo, hi) = (t as f64, (t + dt_min) as f64);
        self.meals.iter().filter(|m| m.time_min >= lo && m.time_min < hi).map(|m| m.carbs).sum()
    }
}
