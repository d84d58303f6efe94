use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::physiology::{calibrate_stationary, PhysioConstants};
use crate::error::{Error, Result};

pub const EGP_SWEEP_START: u32 = 110;
pub const EGP_SWEEP_STEP: u32 = 5;
pub const EGP_SWEEP_END: u32 = 410;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    M1,
    M2,
    M3,
}

impl ModelFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelFamily::M1 => "m1",
            ModelFamily::M2 => "m2",
            ModelFamily::M3 => "m3",
        }
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(ModelFamily::M1),
            "m2" => Ok(ModelFamily::M2),
            "m3" => Ok(ModelFamily::M3),
            other => Err(Error::Config(format!("unknown model family '{other}' (expected m1, m2 or m3)"))),
        }
    }
}

/// Independent random streams derived from one subject seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngPurpose {
    Parameters = 0,
    Physiology = 1,
    Sensors = 2,
}

impl RngPurpose {
    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self as u64);
        rng
    }
}

/// Seed of subject `index` under `master_seed` (splitmix64 finalizer).
pub fn subject_seed(master_seed: u64, index: usize) -> u64 {
    let mut z = master_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The endogenous glucose production sweep `{110:5:410}`.
pub fn egp_sweep() -> Vec<f64> {
    (EGP_SWEEP_START..=EGP_SWEEP_END).step_by(EGP_SWEEP_STEP as usize).map(f64::from).collect()
}

/// Sampled and calibrated parameters of one subject.
///
/// For `M3` subjects `p1`, `p4`, `p6` and `p7` hold the effective ODE
/// parameters derived from `c1`, `c2`, `c4` and `x_i0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectParams {
    pub family: ModelFamily,
    pub x_g0: f64,
    pub p1: f64,
    pub p4: f64,
    pub p6: f64,
    pub p7: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c4: Option<f64>,
    pub x_i0: f64,
    pub p_egp: Option<f64>,
    pub sigma_g: f64,
    pub rng_seed: u64,
}

impl SubjectParams {
    /// Absorption gain multiplier applied to carbohydrates (`M3` only).
    pub fn absorption_multiplier(&self) -> f64 {
        self.c1.map_or(1.0, |c| c / 0.02)
    }

    /// Meal-stimulated secretion multiplier (`M3` only).
    pub fn secretion_multiplier(&self) -> f64 {
        self.c2.map_or(0.0, |c| c / 1.5)
    }
}

/// Draws a subject of `family` from its seed.
///
/// `p_egp` is required for `M1` subjects, whose only free parameter is the
/// endogenous glucose production taken from the sweep.
pub fn sample_subject(
    family: ModelFamily,
    rng_seed: u64,
    p_egp: Option<f64>,
    constants: &PhysioConstants,
) -> Result<SubjectParams> {
    let mut rng = RngPurpose::Parameters.rng(rng_seed);
    let mut params = match family {
        ModelFamily::M1 => {
            let p_egp = p_egp.ok_or_else(|| Error::Config("M1 subjects need a p_EGP value".into()))?;
            return Ok(SubjectParams {
                family,
                x_g0: f64::NAN,
                p1: f64::NAN,
                p4: f64::NAN,
                p6: f64::NAN,
                p7: f64::NAN,
                c1: None,
                c2: None,
                c4: None,
                x_i0: f64::NAN,
                p_egp: Some(p_egp),
                sigma_g: 0.0,
                rng_seed,
            });
        }
        ModelFamily::M2 => {
            let x_g0 = rng.random_range(13.0..20.0);
            let p4 = rng.random_range(0.5..2.5);
            let p7 = rng.random_range(0.5..2.5);
            let p1 = rng.random_range(1.5..2.5);
            let sigma_g = rng.random_range(0.1..2.0);
            SubjectParams {
                family,
                x_g0,
                p1,
                p4,
                p6: f64::NAN,
                p7,
                c1: None,
                c2: None,
                c4: None,
                x_i0: f64::NAN,
                p_egp: None,
                sigma_g,
                rng_seed,
            }
        }
        ModelFamily::M3 => {
            let x_g0 = rng.random_range(13.0..20.0);
            let x_i0 = rng.random_range(0.5..1.0);
            let c1 = rng.random_range(0.01..0.03);
            let c2 = rng.random_range(1.0..2.0);
            let c4 = rng.random_range(1.0..2.0);
            let sigma_g = rng.random_range(0.1..2.0);
            SubjectParams {
                family,
                x_g0,
                p1: constants.m3_effect_rate,
                p4: c4 * constants.m3_sensitivity_ref,
                p6: f64::NAN,
                p7: f64::NAN,
                c1: Some(c1),
                c2: Some(c2),
                c4: Some(c4),
                x_i0,
                p_egp: None,
                sigma_g,
                rng_seed,
            }
        }
    };
    calibrate_stationary(&mut params, constants)?;
    Ok(params)
}
