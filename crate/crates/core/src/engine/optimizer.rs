use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// AdaBelief hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBeliefConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdaBeliefConfig {
    fn default() -> Self {
        Self { alpha: 1e-3, beta1: 0.99, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdaBeliefConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Moment accumulators of the projected AdaBelief update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaOsState {
    m: Vec<f64>,
    s: Vec<f64>,
    k: u64,
    config: AdaBeliefConfig,
}

impl AdaOsState {
    pub fn new(dim: usize, config: AdaBeliefConfig) -> Self {
        Self { m: vec![0.0; dim], s: vec![0.0; dim], k: 0, config }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.s
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn config(&self) -> &AdaBeliefConfig {
        &self.config
    }

    /// One projected step from `theta_prev` along the gradient estimate,
    /// confined to `[lower, upper]` in every coordinate.
    pub fn step(&mut self, g_hat: &[f64], theta_prev: &[f64], lower: f64, upper: f64) -> Result<Vec<f64>> {
        let n = self.m.len();
        if g_hat.len() != n || theta_prev.len() != n {
            return Err(Error::invalid(format!(
                "dimension mismatch: optimizer {n}, gradient {}, parameters {}",
                g_hat.len(),
                theta_prev.len()
            )));
        }
        if g_hat.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("non-finite gradient estimate"));
        }
        self.k = self.k.checked_add(1).ok_or_else(|| Error::invalid("optimizer step counter overflow"))?;

        let AdaBeliefConfig { alpha, beta1, beta2, eps } = self.config;
        let k = self.k as f64;
        let bias1 = 1.0 - beta1.powf(k);
        let bias2 = 1.0 - beta2.powf(k);

        let mut candidate = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        for i in 0..n {
            let g = g_hat[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.s[i] = beta2 * self.s[i] + (1.0 - beta2) * (self.m[i] - g).powi(2) + eps;
            let m_hat = self.m[i] / bias1;
            let s_hat = self.s[i] / bias2;
            candidate.push(theta_prev[i] - alpha * m_hat / (s_hat.sqrt() + eps));
            weight.push(s_hat);
        }
        Ok(project(&candidate, &weight, lower, upper))
    }
}

/// Weighted projection onto the box `[lower, upper]^n`.
///
/// For a diagonal weight the weighted distance separates by coordinate, so
/// the minimizer is the coordinate-wise clamp whatever the (positive) weights.
pub fn project(x: &[f64], weight_diag: &[f64], lower: f64, upper: f64) -> Vec<f64> {
    debug_assert_eq!(x.len(), weight_diag.len());
    debug_assert!(weight_diag.iter().all(|w| *w > 0.0), "projection weight must be positive definite");
    x.iter().map(|v| v.clamp(lower, upper)).collect()
}
