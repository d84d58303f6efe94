//! The AdaOS titration loop and its building blocks.

mod control;
mod cost;
mod optimizer;
mod rls;
mod titration;

pub use control::{apply_dose, control_law, dither, ControllerParams, Errors, PARAM_LOWER, PARAM_UPPER};
pub use cost::{measurement_cost, smoothing_cost, smoothing_cost_gradient, softmin, CostBreakdown, SOFTMIN_SHARPNESS};
pub use optimizer::{project, AdaBeliefConfig, AdaOsState};
pub use rls::{condition_number, Forgetting, RlsState};
pub use titration::{DayRecord, EngineConfig, TitrationEngine};
