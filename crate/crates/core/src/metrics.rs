//! Glucose-management measures, PHG time fractions and cohort aggregates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// mg/dL per mmol/L for glucose.
pub const MGDL_PER_MMOL: f64 = 18.016;

/// Per-subject measures. Percentages are in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    #[serde(rename = "tir_pct")]
    pub tir: f64,
    #[serde(rename = "tar1_pct")]
    pub tar1: f64,
    #[serde(rename = "tar2_pct")]
    pub tar2: f64,
    #[serde(rename = "tbr1_pct")]
    pub tbr1: f64,
    #[serde(rename = "tbr2_pct")]
    pub tbr2: f64,
    #[serde(rename = "ag_mmol_l")]
    pub ag: f64,
    #[serde(rename = "gv_pct")]
    pub gv: f64,
    #[serde(rename = "gmi_pct")]
    pub gmi: f64,
    #[serde(rename = "mean_dose_u")]
    pub mean_dose: f64,
    /// PHG fractions are NaN when no score trace exists (daily-FBG models).
    #[serde(rename = "phg_gt08_pct")]
    pub phg_gt_08: f64,
    #[serde(rename = "phg_lt05_pct")]
    pub phg_lt_05: f64,
    #[serde(rename = "phg_lt02_pct")]
    pub phg_lt_02: f64,
}

impl RunMetrics {
    /// Column names in emission order.
    pub const COLUMNS: [&'static str; 12] = [
        "tir_pct",
        "tar1_pct",
        "tar2_pct",
        "tbr1_pct",
        "tbr2_pct",
        "ag_mmol_l",
        "gv_pct",
        "gmi_pct",
        "mean_dose_u",
        "phg_gt08_pct",
        "phg_lt05_pct",
        "phg_lt02_pct",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.tir,
            self.tar1,
            self.tar2,
            self.tbr1,
            self.tbr2,
            self.ag,
            self.gv,
            self.gmi,
            self.mean_dose,
            self.phg_gt_08,
            self.phg_lt_05,
            self.phg_lt_02,
        ]
    }
}

pub fn gmi(ag: f64) -> f64 {
    3.31 + 0.02392 * ag * MGDL_PER_MMOL
}

fn pct(count: usize, n: usize) -> f64 {
    100.0 * count as f64 / n as f64
}

/// Mean and sample (n - 1) standard deviation in one pass (Welford).
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let sd = if values.len() > 1 { (m2 / (values.len() - 1) as f64).sqrt() } else { 0.0 };
    (mean, sd)
}

/// Computes the measures from a minute-resolution BG trace, the daily
/// noise-free PHG scores (may be empty) and the daily doses.
pub fn compute_metrics(bg: &[f64], xs: &[f64], max_score: f64, doses: &[f64]) -> Result<RunMetrics> {
    if bg.is_empty() || doses.is_empty() {
        return Err(Error::invalid("metrics need non-empty BG and dose traces"));
    }
    if bg.iter().chain(doses).chain(xs).any(|v| !v.is_finite()) {
        return Err(Error::invalid("metrics traces contain non-finite values"));
    }
    if !xs.is_empty() && !(max_score > 0.0) {
        return Err(Error::invalid(format!("score scale {max_score} must be positive")));
    }
    let mut counts = [0usize; 5];
    for &x in bg {
        let bin = if x < 3.0 {
            0
        } else if x < 3.9 {
            1
        } else if x < 10.0 {
            2
        } else if x < 13.9 {
            3
        } else {
            4
        };
        counts[bin] += 1;
    }
    let n = bg.len();
    let (ag, sd) = mean_sd(bg);
    let gv = if ag > 0.0 { 100.0 * sd / ag } else { f64::NAN };

    let (phg_gt_08, phg_lt_05, phg_lt_02) = if xs.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let share = |f: &dyn Fn(f64) -> bool| pct(xs.iter().filter(|&&x| f(x / max_score)).count(), xs.len());
        (share(&|r| r > 0.8), share(&|r| r < 0.5), share(&|r| r < 0.2))
    };

    Ok(RunMetrics {
        tbr2: pct(counts[0], n),
        tbr1: pct(counts[1], n),
        tir: pct(counts[2], n),
        tar1: pct(counts[3], n),
        tar2: pct(counts[4], n),
        ag,
        gv,
        gmi: gmi(ag),
        mean_dose: doses.iter().sum::<f64>() / doses.len() as f64,
        phg_gt_08,
        phg_lt_05,
        phg_lt_02,
    })
}

/// Shares of daily FBG samples in [4, 6], below 4 and below 3, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FbgShares {
    pub in_4_6_pct: f64,
    pub below_4_pct: f64,
    pub below_3_pct: f64,
}

impl FbgShares {
    pub fn from_samples(fbg: &[f64]) -> Result<Self> {
        if fbg.is_empty() {
            return Err(Error::invalid("no FBG samples"));
        }
        let count = |f: &dyn Fn(f64) -> bool| pct(fbg.iter().filter(|&&x| f(x)).count(), fbg.len());
        Ok(Self {
            in_4_6_pct: count(&|x| (4.0..=6.0).contains(&x)),
            below_4_pct: count(&|x| x < 4.0),
            below_3_pct: count(&|x| x < 3.0),
        })
    }

    /// Column-wise worst case: least time in range, most time below.
    pub fn worst(shares: &[FbgShares]) -> Option<Self> {
        let first = *shares.first()?;
        Some(shares.iter().fold(first, |w, s| Self {
            in_4_6_pct: w.in_4_6_pct.min(s.in_4_6_pct),
            below_4_pct: w.below_4_pct.max(s.below_4_pct),
            below_3_pct: w.below_3_pct.max(s.below_3_pct),
        }))
    }

    pub fn average(shares: &[FbgShares]) -> Option<Self> {
        if shares.is_empty() {
            return None;
        }
        let n = shares.len() as f64;
        Some(Self {
            in_4_6_pct: shares.iter().map(|s| s.in_4_6_pct).sum::<f64>() / n,
            below_4_pct: shares.iter().map(|s| s.below_4_pct).sum::<f64>() / n,
            below_3_pct: shares.iter().map(|s| s.below_3_pct).sum::<f64>() / n,
        })
    }
}

/// Linear-interpolation quantile (type 7) of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Cohort statistic for one field. NaN entries are skipped; `n` counts the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub n: usize,
}

impl Stat {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return Self { mean: f64::NAN, q1: f64::NAN, median: f64::NAN, q3: f64::NAN, iqr: f64::NAN, n: 0 };
        }
        v.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q1,
            median: quantile_sorted(&v, 0.5),
            q3,
            iqr: q3 - q1,
            n: v.len(),
        }
    }
}

/// Mean and IQR per metric column across subjects.
pub fn cohort_aggregate(per_subject: &[RunMetrics]) -> Result<BTreeMap<String, Stat>> {
    if per_subject.is_empty() {
        return Err(Error::invalid("cohort aggregate needs at least one subject"));
    }
    Ok(RunMetrics::COLUMNS
        .iter()
        .enumerate()
        .map(|(i, name)| (name.to_string(), Stat::from_values(per_subject.iter().map(|m| m.values()[i]))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn four_sample_fixture() {
        let m = compute_metrics(&[3.5, 5.0, 12.0, 15.0], &[], 10.0, &[1.0]).unwrap();
        assert_eq!((m.tbr1, m.tir, m.tar1, m.tar2, m.tbr2), (25.0, 25.0, 25.0, 25.0, 0.0));
        assert_relative_eq!(m.ag, 8.875, epsilon = 1e-12);
        assert!(m.phg_gt_08.is_nan());
    }

    #[test]
    fn constant_trace() {
        let m = compute_metrics(&[5.5; 100], &[10.0; 5], 10.0, &[20.0, 30.0]).unwrap();
        assert_eq!(m.tir, 100.0);
        assert_eq!(m.gv, 0.0);
        assert_eq!(m.ag, 5.5);
        assert_relative_eq!(m.gmi, 3.31 + 0.02392 * 99.088, epsilon = 1e-12);
        assert!((m.gmi - 5.680).abs() < 5e-4);
        assert_eq!(m.mean_dose, 25.0);
        assert_eq!((m.phg_gt_08, m.phg_lt_05, m.phg_lt_02), (100.0, 0.0, 0.0));
    }

    #[test]
    fn range_edges() {
        let m = compute_metrics(&[3.0, 3.9, 10.0, 13.9], &[], 10.0, &[0.0]).unwrap();
        assert_eq!((m.tbr2, m.tbr1, m.tir, m.tar1, m.tar2), (0.0, 25.0, 25.0, 25.0, 25.0));
    }

    #[test]
    fn phg_thresholds() {
        let m = compute_metrics(&[5.0], &[1.0, 3.0, 6.0, 9.0], 10.0, &[0.0]).unwrap();
        assert_eq!((m.phg_gt_08, m.phg_lt_05, m.phg_lt_02), (25.0, 50.0, 25.0));
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(compute_metrics(&[], &[], 10.0, &[1.0]).is_err());
        assert!(compute_metrics(&[1.0], &[], 10.0, &[]).is_err());
        assert!(compute_metrics(&[f64::NAN], &[], 10.0, &[1.0]).is_err());
        assert!(cohort_aggregate(&[]).is_err());
    }

    #[test]
    fn quantiles() {
        let s = Stat::from_values([4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.iqr, 1.5);
        assert_eq!(s.median, 2.5);
        assert_eq!(Stat::from_values([7.0]).iqr, 0.0);
        assert_eq!(Stat::from_values([f64::NAN]).n, 0);
    }

    #[test]
    fn single_subject_zero_iqr_and_named_columns() {
        let m = compute_metrics(&[4.0, 6.0, 11.0], &[5.0], 10.0, &[3.0]).unwrap();
        let agg = cohort_aggregate(&[m]).unwrap();
        assert_eq!(agg.len(), 12);
        for (name, stat) in &agg {
            assert_eq!(stat.iqr, 0.0, "{name}");
        }
        let json = serde_json::to_value(m).unwrap();
        let keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        for col in RunMetrics::COLUMNS {
            assert!(keys.contains(&col.to_string()));
        }
    }

    #[test]
    fn fbg_shares_by_hand() {
        let s = FbgShares::from_samples(&[2.5, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 6.5]).unwrap();
        assert_eq!((s.in_4_6_pct, s.below_4_pct, s.below_3_pct), (37.5, 25.0, 12.5));
        let t = FbgShares::from_samples(&[5.0, 5.0]).unwrap();
        let w = FbgShares::worst(&[s, t]).unwrap();
        assert_eq!((w.in_4_6_pct, w.below_4_pct, w.below_3_pct), (37.5, 25.0, 12.5));
        let a = FbgShares::average(&[s, t]).unwrap();
        assert_eq!(a.in_4_6_pct, 68.75);
    }

    proptest! {
        #[test]
        fn ranges_partition(trace in prop::collection::vec(0.0f64..30.0, 1..300)) {
            let m = compute_metrics(&trace, &[], 10.0, &[1.0]).unwrap();
            let total = m.tir + m.tar1 + m.tar2 + m.tbr1 + m.tbr2;
            prop_assert!((total - 100.0).abs() < 1e-9);
            for p in [m.tir, m.tar1, m.tar2, m.tbr1, m.tbr2] {
                prop_assert!((0.0..=100.0).contains(&p));
            }
        }

        #[test]
        fn gv_scale_invariant(trace in prop::collection::vec(1.0f64..20.0, 2..100), c in 0.1f64..10.0) {
            let a = compute_metrics(&trace, &[], 10.0, &[1.0]).unwrap();
            let scaled: Vec<f64> = trace.iter().map(|x| c * x).collect();
            let b = compute_metrics(&scaled, &[], 10.0, &[1.0]).unwrap();
            prop_assert!((a.gv - b.gv).abs() < 1e-9 * a.gv.max(1.0));
        }

        #[test]
        fn aggregate_permutation_invariant(values in prop::collection::vec(0.0f64..100.0, 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = values.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(Stat::from_values(values), Stat::from_values(shuffled.clone()));
        }
    }

    #[test]
    fn gmi_increasing() {
        assert!(gmi(5.0) < gmi(5.0001));
    }
}
