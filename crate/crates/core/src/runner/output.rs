use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::simulate::{RunArtifact, SubjectOutcome};
use crate::cohort::SubjectParams;
use crate::error::{Error, Result};
use crate::metrics::{cohort_aggregate, FbgShares, RunMetrics, Stat};
use crate::sensors::PhgTraits;

pub const DAYS_FILE: &str = "days.csv";
pub const SUBJECTS_FILE: &str = "subjects.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COHORT_FILE: &str = "cohort.csv";

pub const DAY_COLUMNS: [&str; 10] = [
    "subject_id",
    "day",
    "dose_u",
    "fbg_true",
    "fbg_meas",
    "y_s",
    "x_s",
    "k_p_hat",
    "k_s_hat",
    "cost_total",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSubject {
    pub subject_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbgShareSummary {
    pub average: FbgShares,
    pub worst: FbgShares,
}

/// Cohort summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub completed_subjects: usize,
    pub failed_subjects: Vec<FailedSubject>,
    /// Mean, quartiles and IQR per metric column over completed subjects.
    pub metrics: BTreeMap<String, Stat>,
    pub fbg_shares: Option<FbgShareSummary>,
    pub max_cond_p: Option<f64>,
}

impl RunSummary {
    pub fn from_artifact(run: &RunArtifact) -> Result<Self> {
        let completed: Vec<&SubjectOutcome> = run.subjects.iter().filter(|s| s.error.is_none()).collect();
        let per_subject: Vec<RunMetrics> = completed.iter().filter_map(|s| s.metrics).collect();
        let metrics = if per_subject.is_empty() { BTreeMap::new() } else { cohort_aggregate(&per_subject)? };
        let shares: Vec<FbgShares> = completed.iter().filter_map(|s| s.fbg_shares).collect();
        let fbg_shares = match (FbgShares::average(&shares), FbgShares::worst(&shares)) {
            (Some(average), Some(worst)) => Some(FbgShareSummary { average, worst }),
            _ => None,
        };
        let max_cond_p = completed.iter().filter_map(|s| s.max_cond_p).reduce(f64::max);
        Ok(Self {
            scenario: run.config.name.clone(),
            config: run.config.clone(),
            completed_subjects: completed.len(),
            failed_subjects: run
                .failures()
                .map(|s| FailedSubject { subject_id: s.index, error: s.error.clone().unwrap_or_default() })
                .collect(),
            metrics,
            fbg_shares,
            max_cond_p,
        })
    }

    pub fn mean(&self, column: &str) -> Option<f64> {
        self.metrics.get(column).map(|s| s.mean)
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let wrap = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_days_csv(path: &Path, run: &RunArtifact) -> Result<()> {
    let rows = run.subjects.iter().flat_map(|s| &s.days).map(|d| {
        vec![
            d.subject_id.to_string(),
            d.day.to_string(),
            num(d.dose_u),
            num(d.fbg_true),
            num(d.fbg_meas),
            opt(d.y_s),
            opt(d.x_s),
            opt(d.k_p_hat),
            opt(d.k_s_hat),
            opt(d.cost_total),
        ]
    });
    write_rows(path, &DAY_COLUMNS, rows)
}

pub fn subject_columns() -> Vec<&'static str> {
    let mut cols = vec!["subject_id", "status", "rng_seed", "p_egp"];
    cols.extend(RunMetrics::COLUMNS);
    cols.extend(["fbg_in_4_6_pct", "fbg_below_4_pct", "fbg_below_3_pct", "max_cond_p", "error"]);
    cols
}

pub fn write_subjects_csv(path: &Path, run: &RunArtifact) -> Result<()> {
    let rows = run.subjects.iter().map(|s| {
        let mut row = vec![
            s.index.to_string(),
            if s.error.is_none() { "ok" } else { "failed" }.to_string(),
            s.params.rng_seed.to_string(),
            opt(s.params.p_egp),
        ];
        match s.metrics {
            Some(m) => row.extend(m.values().map(num)),
            None => row.extend(std::iter::repeat_n(String::new(), RunMetrics::COLUMNS.len())),
        }
        match s.fbg_shares {
            Some(f) => row.extend([num(f.in_4_6_pct), num(f.below_4_pct), num(f.below_3_pct)]),
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        row.push(opt(s.max_cond_p));
        row.push(s.error.clone().unwrap_or_default());
        row
    });
    write_rows(path, &subject_columns(), rows)
}

pub const COHORT_COLUMNS: [&str; 19] = [
    "subject_id",
    "family",
    "rng_seed",
    "x_g0",
    "p1",
    "p4",
    "p6",
    "p7",
    "c1",
    "c2",
    "c4",
    "x_i0",
    "p_egp",
    "sigma_g",
    "rho",
    "d",
    "h_days",
    "eta",
    "p_f",
];

pub fn write_cohort_csv(path: &Path, cohort: &[(SubjectParams, Option<PhgTraits>)]) -> Result<()> {
    let rows = cohort.iter().enumerate().map(|(i, (p, t))| {
        let mut row = vec![
            i.to_string(),
            p.family.as_str().to_string(),
            p.rng_seed.to_string(),
            num(p.x_g0),
            num(p.p1),
            num(p.p4),
            num(p.p6),
            num(p.p7),
            opt(p.c1),
            opt(p.c2),
            opt(p.c4),
            num(p.x_i0),
            opt(p.p_egp),
            num(p.sigma_g),
        ];
        match t {
            Some(t) => row.extend([num(t.rho), num(t.d), t.h_days.to_string(), num(t.eta), num(t.p_f)]),
            None => row.extend(std::iter::repeat_n(String::new(), 5)),
        }
        row
    });
    write_rows(path, &COHORT_COLUMNS, rows)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json { path: path.to_path_buf(), source: e })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Paths of the files written for one run.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub days: PathBuf,
    pub subjects: PathBuf,
    pub summary: PathBuf,
    pub cohort: Option<PathBuf>,
}

/// Writes the per-day, per-subject and summary files into `dir`, plus the
/// cohort manifest when `cohort` is given.
pub fn write_run(
    dir: &Path,
    run: &RunArtifact,
    summary: &RunSummary,
    cohort: Option<&[(SubjectParams, Option<PhgTraits>)]>,
) -> Result<RunFiles> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = RunFiles {
        days: dir.join(DAYS_FILE),
        subjects: dir.join(SUBJECTS_FILE),
        summary: dir.join(SUMMARY_FILE),
        cohort: cohort.map(|_| dir.join(COHORT_FILE)),
    };
    write_days_csv(&files.days, run)?;
    write_subjects_csv(&files.subjects, run)?;
    write_json(&files.summary, summary)?;
    if let (Some(path), Some(cohort)) = (&files.cohort, cohort) {
        write_cohort_csv(path, cohort)?;
    }
    Ok(files)
}

/// Writes `compare.json` (all summaries) and `compare.csv` (one row per
/// scenario with the mean and IQR of every metric).
pub fn write_comparison(dir: &Path, summaries: &[RunSummary]) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_json(&dir.join("compare.json"), &summaries)?;
    let mut header = vec!["scenario".to_string(), "strategy".into(), "model".into(), "completed_subjects".into()];
    for col in RunMetrics::COLUMNS {
        header.push(format!("{col}_mean"));
        header.push(format!("{col}_iqr"));
    }
    header.extend(["fbg_in_4_6_worst_pct".into(), "fbg_below_3_worst_pct".into(), "max_cond_p".into()]);
    let rows = summaries.iter().map(|s| {
        let mut row = vec![
            s.scenario.clone(),
            s.config.strategy.to_string(),
            s.config.model.as_str().to_string(),
            s.completed_subjects.to_string(),
        ];
        for col in RunMetrics::COLUMNS {
            let stat = s.metrics.get(col);
            row.push(opt(stat.map(|x| x.mean)));
            row.push(opt(stat.map(|x| x.iqr)));
        }
        row.push(opt(s.fbg_shares.as_ref().map(|f| f.worst.in_4_6_pct)));
        row.push(opt(s.fbg_shares.as_ref().map(|f| f.worst.below_3_pct)));
        row.push(opt(s.max_cond_p));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&dir.join("compare.csv"), &header, rows)
}
