use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::cohort::MINUTES_PER_DAY;

/// Continuous `[0, H]` or integer `{0, ..., H}` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScale {
    Continuous,
    Discrete,
}

/// How one subject perceives and reports glucose drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhgTraits {
    /// Steepness of the response.
    pub rho: f64,
    /// Decrease ratio at which the noise-free score is half the maximum.
    pub d: f64,
    /// Moving-average window, days.
    pub h_days: u32,
    /// Beta precision of the reported score.
    pub eta: f64,
    /// Probability of not reporting on a given day.
    pub p_f: f64,
    pub scale: ScoreScale,
    pub max_score: f64,
}

/// Draws `ρ ~ U(2,20)`, `d ~ U(0.35,0.85)`, `h ~ U{14,...,30}`,
/// `η ~ U(5,20)` and `p_f ~ U(0.1,0.4)`; the scale defaults to continuous
/// with maximum 10.
pub fn sample_traits<R: Rng + ?Sized>(rng: &mut R) -> PhgTraits {
    PhgTraits {
        rho: rng.random_range(2.0..20.0),
        d: rng.random_range(0.35..0.85),
        h_days: rng.random_range(14..=30),
        eta: rng.random_range(5.0..20.0),
        p_f: rng.random_range(0.1..0.4),
        scale: ScoreScale::Continuous,
        max_score: 10.0,
    }
}

/// Sigmoidal map from decrease ratio to normalized score, with
/// `sig(d) = 1/2`, `sig(0) = 0` and `sig(1) = 1`.
pub fn phg_sigmoid(x: f64, rho: f64, d: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // u = x^(-ln 2 / ln d) = 2^(-q); at x = d, q is exactly 1 and u exactly 1/2
    let q = x.ln() / d.ln();
    let u = (-q).exp2();
    let logit = -q * std::f64::consts::LN_2 - (1.0 - u).ln();
    let t = rho * logit;
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Ratio of the latest glucose to its trailing mean, capped to `[0, 1]`.
/// An empty history carries no information and yields 1.
pub fn decrease_ratio(history: &[f64]) -> f64 {
    match history.last() {
        None => 1.0,
        Some(&last) => {
            let mean = history.iter().sum::<f64>() / history.len() as f64;
            if mean <= 0.0 {
                1.0
            } else {
                (last / mean).clamp(0.0, 1.0)
            }
        }
    }
}

/// Trailing glucose samples covering the PHG window.
#[derive(Debug, Clone)]
pub struct BgHistory {
    samples: VecDeque<f64>,
    capacity: usize,
}

impl BgHistory {
    /// Holds `(24 * 60 / dt_min) * h_days` samples.
    pub fn new(h_days: u32, dt_min: u64) -> Self {
        let capacity = ((MINUTES_PER_DAY / dt_min.max(1)) as usize * h_days.max(1) as usize).max(1);
        Self { samples: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, bg: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(bg);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ratio(&mut self) -> f64 {
        decrease_ratio(self.samples.make_contiguous())
    }
}

/// One day's score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreDraw {
    /// Noise-free score `H sig(x_r)`.
    pub x_s: f64,
    /// Reported score.
    pub y_s: f64,
    pub missing: bool,
}

/// Reported PHG score for decrease ratio `x_r`.
///
/// The noise-free score `x_s = H sig(x_r)` is perturbed by
/// `H ζ, ζ ~ Beta(η x_s/H, η (1 - x_s/H))`, rounded on discrete scales and
/// replaced by `H` when glucose is truly below 3.9 mmol/L. With
/// `missing_enabled`, the previous report is repeated with probability `p_f`.
pub fn phg_score<R: Rng + ?Sized>(
    x_r: f64,
    traits: &PhgTraits,
    true_bg: f64,
    prev_score: f64,
    missing_enabled: bool,
    rng: &mut R,
) -> ScoreDraw {
    let h = traits.max_score;
    let x_s = h * phg_sigmoid(x_r, traits.rho, traits.d);
    // draw unconditionally so the stream does not depend on the scenario
    let skip = rng.random::<f64>() < traits.p_f;
    let zeta = beta_draw(x_s / h, traits.eta, rng);
    if missing_enabled && skip {
        return ScoreDraw { x_s, y_s: prev_score, missing: true };
    }
    let mut y_s = h * zeta;
    if traits.scale == ScoreScale::Discrete {
        y_s = y_s.round();
    }
    if true_bg < 3.9 {
        y_s = h;
    }
    ScoreDraw { x_s, y_s: y_s.clamp(0.0, h), missing: false }
}

/// `Beta(mean η, (1 - mean) η)` through two Gamma draws; degenerate means
/// return themselves.
fn beta_draw<R: Rng + ?Sized>(mean: f64, eta: f64, rng: &mut R) -> f64 {
    let a = mean * eta;
    let b = (1.0 - mean) * eta;
    if !(a > 0.0) || !(b > 0.0) {
        return mean.clamp(0.0, 1.0);
    }
    let (Ok(ga), Ok(gb)) = (Gamma::new(a, 1.0), Gamma::new(b, 1.0)) else {
        return mean.clamp(0.0, 1.0);
    };
    let x: f64 = ga.sample(rng);
    let y: f64 = gb.sample(rng);
    if x + y > 0.0 {
        x / (x + y)
    } else {
        mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn traits(eta: f64) -> PhgTraits {
        PhgTraits {
            rho: 5.0,
            d: 0.5,
            h_days: 14,
            eta,
            p_f: 0.0,
            scale: ScoreScale::Continuous,
            max_score: 10.0,
        }
    }

    #[test]
    fn sigmoid_half_point_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let t = sample_traits(&mut rng);
            assert_eq!(phg_sigmoid(t.d, t.rho, t.d), 0.5);
        }
    }

    #[test]
    fn sigmoid_closed_form_rho2_d_half() {
        // exponent 1: sig(x) = x^2 / (x^2 + (1 - x)^2)
        for x in [0.1, 0.3, 0.8, 0.95] {
            let expected = x * x / (x * x + (1.0 - x) * (1.0 - x));
            assert!((phg_sigmoid(x, 2.0, 0.5) - expected).abs() < 1e-12);
        }
        assert!((phg_sigmoid(0.8, 2.0, 0.5) - 0.941_176_470_588).abs() < 1e-9);
    }

    #[test]
    fn sigmoid_boundaries() {
        assert_eq!(phg_sigmoid(1.0, 7.0, 0.4), 1.0);
        assert_eq!(phg_sigmoid(0.0, 7.0, 0.4), 0.0);
        assert!(phg_sigmoid(1e-300, 20.0, 0.85) >= 0.0);
        assert!(phg_sigmoid(1.0 - 1e-16, 20.0, 0.2) <= 1.0);
    }

    #[test]
    fn figure_examples_ordered_by_steepness() {
        let examples = [(2.0, 0.5), (5.0, 0.8), (20.0, 0.2)];
        let slopes: Vec<f64> = examples
            .iter()
            .map(|&(rho, d)| {
                assert_eq!(phg_sigmoid(d, rho, d), 0.5);
                let h = 1e-6;
                (phg_sigmoid(d + h, rho, d) - phg_sigmoid(d - h, rho, d)) / (2.0 * h)
            })
            .collect();
        // slope at the half point is rho ln 2 / (2 d ln(1/d)): 2, 9.7 and 21.5
        assert!(slopes[0] < slopes[1] && slopes[1] < slopes[2], "{slopes:?}");
    }

    #[test]
    fn decrease_ratio_cases() {
        assert_eq!(decrease_ratio(&[]), 1.0);
        assert_eq!(decrease_ratio(&[8.0; 500]), 1.0);
        let rising: Vec<f64> = (0..100).map(|i| 5.0 + i as f64 * 0.1).collect();
        assert_eq!(decrease_ratio(&rising), 1.0);
        let mut step = vec![10.0; 4031];
        step.push(5.0);
        let r = decrease_ratio(&step);
        let n = step.len() as f64;
        assert!((r - 5.0 / ((10.0 * (n - 1.0) + 5.0) / n)).abs() < 1e-12);
        assert!(r > 0.5 && r < 0.501);
    }

    #[test]
    fn history_window_is_bounded() {
        let mut h = BgHistory::new(14, 5);
        for _ in 0..10_000 {
            h.push(9.0);
        }
        assert_eq!(h.len(), 14 * 288);
        h.push(4.5);
        assert!(h.ratio() > 0.5);
    }

    #[test]
    fn beta_moments_match() {
        let t = traits(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        // decrease ratio at d gives x_s = H / 2
        let draws: Vec<f64> = (0..n).map(|_| phg_score(0.5, &t, 8.0, 10.0, false, &mut rng).y_s).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let true_var = 5.0 * 5.0 / 11.0;
        assert!((mean - 5.0).abs() < 3.0 * (true_var / n as f64).sqrt());
        // Beta(5,5) scaled by 10: fourth central moment gives the sd of the sample variance
        let m4 = draws.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
        let var_se = ((m4 - true_var * true_var) / n as f64).sqrt();
        assert!((var - true_var).abs() < 3.0 * var_se, "var {var} vs {true_var}");
    }

    #[test]
    fn no_drop_gives_full_score() {
        let t = traits(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = phg_score(1.0, &t, 8.0, 3.0, false, &mut rng);
        assert_eq!(s.x_s, 10.0);
        assert_eq!(s.y_s, 10.0);
    }

    #[test]
    fn real_hypoglycemia_overrides_score() {
        let t = traits(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for x_r in [0.0, 0.2, 0.6] {
            assert_eq!(phg_score(x_r, &t, 3.5, 1.0, false, &mut rng).y_s, 10.0);
        }
    }

    #[test]
    fn missing_days_repeat_previous_score() {
        let t = PhgTraits { p_f: 1.0, ..traits(10.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = phg_score(0.4, &t, 8.0, 6.5, true, &mut rng);
        assert!(s.missing);
        assert_eq!(s.y_s, 6.5);
        let s = phg_score(0.4, &t, 8.0, 6.5, false, &mut rng);
        assert!(!s.missing);
    }

    #[test]
    fn discrete_scale_yields_integers_in_range() {
        let t = PhgTraits { scale: ScoreScale::Discrete, max_score: 5.0, ..traits(8.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..5000 {
            let y = phg_score((i % 100) as f64 / 100.0, &t, 7.0, 5.0, false, &mut rng).y_s;
            assert_eq!(y, y.round());
            assert!((0.0..=5.0).contains(&y));
        }
    }
}
