use serde::{Deserialize, Serialize};

use super::control::Errors;
use crate::error::{ensure_finite, Error, Result};

/// Sharpness of the soft minimum used in the hypoglycemia penalty.
pub const SOFTMIN_SHARPNESS: f64 = 50.0;

const HYPO_WEIGHT: f64 = 10.0;
const SCORE_WEIGHT: f64 = 10.0;

/// Components of the daily cost.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Scaled squared distance to the glucose reference.
    pub c_g: f64,
    /// Squared soft-minimum of the glucose error and zero.
    pub c_h: f64,
    /// Squared normalized PHG shortfall.
    pub c_s: f64,
    /// Smoothing cost on the parameter trajectory.
    pub c_theta: f64,
    pub total: f64,
}

/// Soft minimum `-(1/a) log(exp(-a x1) + exp(-a x2))`, evaluated with the
/// larger exponent factored out so it never overflows.
pub fn softmin(x1: f64, x2: f64, a: f64) -> f64 {
    let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
    lo - (-a * (hi - lo)).exp().ln_1p() / a
}

/// Cost of one day's measurements, `c_g + 10 c_h + 10 c_s`.
pub fn measurement_cost(y_g: f64, y_s: f64, reference: f64, max_score: f64) -> Result<CostBreakdown> {
    ensure_finite("reference", reference)?;
    if !(reference > 0.0) {
        return Err(Error::invalid(format!("reference must be positive, got {reference}")));
    }
    let errors = Errors::from_measurements(y_g, y_s, reference, max_score)?;
    Ok(cost_from_errors(errors, reference))
}

pub(crate) fn cost_from_errors(errors: Errors, reference: f64) -> CostBreakdown {
    let c_g = (errors.glucose / reference).powi(2);
    let c_h = softmin(errors.glucose, 0.0, SOFTMIN_SHARPNESS).powi(2);
    let c_s = errors.score.powi(2);
    CostBreakdown {
        c_g,
        c_h,
        c_s,
        c_theta: 0.0,
        total: c_g + HYPO_WEIGHT * c_h + SCORE_WEIGHT * c_s,
    }
}

/// `0.5 * ||theta - theta_prev2||^2`.
pub fn smoothing_cost(theta: &[f64], theta_prev2: &[f64]) -> f64 {
    0.5 * theta.iter().zip(theta_prev2).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Gradient of [`smoothing_cost`] with respect to `theta`.
pub fn smoothing_cost_gradient(theta: &[f64], theta_prev2: &[f64]) -> Vec<f64> {
    debug_assert_eq!(theta.len(), theta_prev2.len());
    theta.iter().zip(theta_prev2).map(|(a, b)| a - b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmin_examples() {
        assert_abs_diff_eq!(softmin(0.0, 0.0, 50.0), -(2f64.ln()) / 50.0, epsilon = 1e-15);
        assert!((softmin(-1.5, 0.0, 50.0) + 1.5).abs() <= 1e-30);
        assert!(softmin(10.0, 0.0, 50.0).abs() <= 1e-30);
    }

    #[test]
    fn softmin_does_not_overflow() {
        assert_eq!(softmin(-1e4, 0.0, 50.0), -1e4);
        assert_eq!(softmin(1e4, 2e4, 50.0), 1e4);
        assert!(softmin(-300.0, 300.0, 50.0).is_finite());
    }

    #[test]
    fn softmin_is_below_min_and_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x1: f64 = rng.random_range(-5.0..5.0);
            let x2: f64 = rng.random_range(-5.0..5.0);
            assert!(softmin(x1, x2, 50.0) <= x1.min(x2));
            assert!((softmin(x1, x2, 1e6) - x1.min(x2)).abs() < 1e-5);
        }
    }

    #[test]
    fn on_target_full_score() {
        let c = measurement_cost(5.5, 10.0, 5.5, 10.0).unwrap();
        assert_eq!(c.c_g, 0.0);
        assert_eq!(c.c_s, 0.0);
        // smoothing residue of the soft minimum at zero error
        assert_abs_diff_eq!(c.c_h, (2f64.ln() / 50.0).powi(2), epsilon = 1e-15);
        assert!(c.c_h < 2e-4);
    }

    #[test]
    fn hyperglycemia_only_costs_tracking() {
        let c = measurement_cost(12.0, 10.0, 5.5, 10.0).unwrap();
        assert_abs_diff_eq!(c.c_g, (6.5f64 / 5.5).powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(c.c_g, 1.396_694_2, epsilon = 1e-6);
        assert!(c.c_h < 1e-30);
        assert_eq!(c.c_s, 0.0);
        assert_abs_diff_eq!(c.total, c.c_g, epsilon = 1e-12);
    }

    #[test]
    fn hypoglycemia_is_penalized() {
        let c = measurement_cost(4.0, 5.0, 5.5, 10.0).unwrap();
        assert_abs_diff_eq!(c.c_h, 2.25, epsilon = 1e-12);
        assert_abs_diff_eq!(c.c_s, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(c.total, (1.5f64 / 5.5).powi(2) + 22.5 + 2.5, epsilon = 1e-10);
        assert_abs_diff_eq!(c.total, 25.074, epsilon = 1e-3);
    }

    #[test]
    fn measurement_cost_rejects_score_out_of_range() {
        assert!(measurement_cost(5.0, 10.5, 5.5, 10.0).is_err());
        assert!(measurement_cost(5.0, -0.5, 5.5, 10.0).is_err());
        assert!(measurement_cost(5.0, 5.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn smoothing_gradient_examples() {
        assert_eq!(smoothing_cost_gradient(&[0.3, 1.0], &[0.3, 1.0]), vec![0.0, 0.0]);
        let g = smoothing_cost_gradient(&[0.5, 1.0], &[0.3, 1.0]);
        assert_abs_diff_eq!(g[0], 0.2, epsilon = 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn smoothing_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..100 {
            let theta = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            let prev = [rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)];
            let g = smoothing_cost_gradient(&theta, &prev);
            for i in 0..2 {
                let mut up = theta;
                let mut dn = theta;
                up[i] += h;
                dn[i] -= h;
                let fd = (smoothing_cost(&up, &prev) - smoothing_cost(&dn, &prev)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "coord {i}: fd {fd} vs {}", g[i]);
            }
        }
    }
}
