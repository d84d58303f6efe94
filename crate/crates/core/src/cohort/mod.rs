//! Virtual T2D subjects.
//!
//! Three model families are available. `M2` is a jump-diffusion glucose
//! model with Poisson meal jumps, `M3` shares its ODE core but feeds
//! scheduled meals through a gut compartment, and `M1` is a daily-resolution
//! fasting glucose model used for the endogenous-production sweep.

mod daily;
mod meals;
mod params;
mod physiology;

pub use daily::{DailyConstants, DailySubject};
pub use meals::{MealEvent, MealSchedule, PoissonMeals};
pub use params::{
    egp_sweep, sample_subject, subject_seed, ModelFamily, RngPurpose, SubjectParams, EGP_SWEEP_END, EGP_SWEEP_START,
    EGP_SWEEP_STEP,
};
pub use physiology::{
    calibrate_stationary, drift, steady_state_fbg, step_physiology, PhysioConstants, PhysioState, VirtualSubject,
    BG_FLOOR, FASTING_MINUTE, INJECTION_MINUTE, MINUTES_PER_DAY,
};
