//! Scenario configuration, cohort-parallel execution and run outputs.

mod config;
mod output;
mod simulate;

pub use config::{ScenarioConfig, ScenarioFile, Strategy};
pub use output::{
    subject_columns, write_cohort_csv, write_comparison, write_days_csv, write_run, write_subjects_csv,
    FailedSubject, FbgShareSummary, RunFiles, RunSummary, COHORT_COLUMNS, COHORT_FILE, DAYS_FILE, DAY_COLUMNS,
    SUBJECTS_FILE, SUMMARY_FILE,
};
pub use simulate::{cohort_manifest, cohort_subject, run_scenario, simulate_subject, DayRow, RunArtifact, SubjectOutcome};
