use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Parameters of the glucose-dependent SMBG error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmbgParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub kappa: f64,
}

impl Default for SmbgParams {
    fn default() -> Self {
        Self { sigma1: 0.415, sigma2: 0.1, kappa: 5.0 }
    }
}

impl SmbgParams {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.sigma1 >= 0.0 && self.sigma2 >= 0.0 && self.kappa > 0.0) {
            return Err(crate::Error::Config(format!(
                "SMBG error needs sigma1, sigma2 >= 0 and kappa > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Error standard deviation `(σ2/κ) ln(1 + e^{κ(x - 4.2)}) + σ1` at glucose `x_g`.
pub fn smbg_sigma(x_g: f64, params: &SmbgParams) -> f64 {
    params.sigma2 / params.kappa * softplus(params.kappa * (x_g - 4.2)) + params.sigma1
}

/// A noisy fingerstick reading of `x_g`, never negative.
pub fn smbg_measure<R: Rng + ?Sized>(x_g: f64, params: &SmbgParams, rng: &mut R) -> f64 {
    let eps: f64 = rng.sample(StandardNormal);
    (x_g + smbg_sigma(x_g, params) * eps).max(0.0)
}
