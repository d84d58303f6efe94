//! Model-free titration of long-acting insulin.
//!
//! The dose change each day follows a proportional law on the fasting glucose
//! error whose gain is attenuated by a patient-reported pseudo-hypoglycemia
//! (PHG) score. The two gains are tuned online: a recursive least-squares
//! estimator with directional forgetting fits a local linear model of the
//! daily cost against the applied gains, and its gradient estimate drives a
//! projected AdaBelief step.
//!
//! Besides the titration engine the crate ships everything needed to
//! benchmark it: virtual T2D subjects ([`cohort`]), SMBG and PHG score
//! models ([`sensors`]), standard-of-care and extremum-seeking baselines
//! ([`baselines`]), glucose-management metrics ([`metrics`]) and a
//! deterministic parallel trial runner ([`runner`]).

// `!(x > 0.0)` is how NaN gets rejected alongside bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cohort;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod runner;
pub mod sensors;

pub use error::{Error, Result};
