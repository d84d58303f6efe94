//! Measurement models: fingerstick glucose and the daily PHG score.

mod phg;
mod smbg;

pub use phg::{
    decrease_ratio, phg_score, phg_sigmoid, sample_traits, BgHistory, PhgTraits, ScoreDraw, ScoreScale,
};
pub use smbg::{smbg_measure, smbg_sigma, SmbgParams};
