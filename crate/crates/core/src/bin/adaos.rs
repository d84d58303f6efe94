use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaos::cohort::ModelFamily;
use adaos::runner::{cohort_manifest, run_scenario, write_comparison, write_run, RunSummary, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adaos", version, about = "Closed-loop insulin titration trials on virtual T2D cohorts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        /// Scenario JSON file or preset name (adaos, adaos_h5, adaos_f,
        /// adaos_pf, adaos_c, rule202, step, esc).
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run several scenarios on the same cohort and write a combined summary.
    Compare {
        /// Comma-separated scenario files or preset names.
        #[arg(long, value_delimiter = ',', required = true)]
        scenarios: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelFamily>,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    days: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write the cohort manifest (subject parameters and PHG traits).
    #[arg(long)]
    emit_cohort: bool,
}

fn parse_model(s: &str) -> Result<ModelFamily, String> {
    s.parse::<ModelFamily>().map_err(|e| e.to_string())
}

impl Common {
    fn apply(&self, mut cfg: ScenarioConfig) -> ScenarioConfig {
        if let Some(m) = self.model {
            cfg = cfg.with_model(m);
        }
        if let Some(n) = self.subjects {
            cfg.n_subjects = n;
        }
        if let Some(n) = self.days {
            cfg.n_days = n;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg
    }
}

fn run_one(cfg: &ScenarioConfig, dir: &Path, emit_cohort: bool) -> adaos::Result<RunSummary> {
    let run = run_scenario(cfg)?;
    let summary = RunSummary::from_artifact(&run)?;
    let cohort = if emit_cohort { Some(cohort_manifest(cfg)?) } else { None };
    let files = write_run(dir, &run, &summary, cohort.as_deref())?;
    eprintln!(
        "{}: {} of {} subjects completed, summary in {}",
        cfg.name,
        summary.completed_subjects,
        cfg.n_subjects,
        files.summary.display()
    );
    for failed in &summary.failed_subjects {
        eprintln!("  subject {} failed: {}", failed.subject_id, failed.error);
    }
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, common } => ScenarioConfig::load(&scenario)
            .map(|cfg| common.apply(cfg))
            .and_then(|cfg| run_one(&cfg, &common.out, common.emit_cohort))
            .map(|s| s.failed_subjects.is_empty()),
        Command::Compare { scenarios, common } => (|| {
            let mut summaries = Vec::new();
            let mut names = std::collections::HashSet::new();
            for arg in &scenarios {
                let cfg = common.apply(ScenarioConfig::load(arg)?);
                if !names.insert(cfg.name.clone()) {
                    return Err(adaos::Error::Config(format!("scenario name '{}' appears twice", cfg.name)));
                }
                summaries.push(run_one(&cfg, &common.out.join(&cfg.name), common.emit_cohort)?);
            }
            write_comparison(&common.out, &summaries)?;
            Ok(summaries.iter().all(|s| s.failed_subjects.is_empty()))
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some subjects failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                adaos::Error::Config(_) | adaos::Error::InvalidInput(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
