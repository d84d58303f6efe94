use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ScenarioConfig, Strategy};
use crate::baselines::{esc_cost, EscController, StandardOfCare, WeeklyRule};
use crate::cohort::{
    egp_sweep, sample_subject, subject_seed, DailySubject, ModelFamily, RngPurpose, SubjectParams,
    VirtualSubject, FASTING_MINUTE, INJECTION_MINUTE, MINUTES_PER_DAY,
};
use crate::engine::TitrationEngine;
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, FbgShares, RunMetrics};
use crate::sensors::{phg_score, sample_traits, smbg_measure, BgHistory, PhgTraits};

/// One row of the per-day output. Missing quantities are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DayRow {
    pub subject_id: usize,
    pub day: u64,
    pub dose_u: f64,
    pub fbg_true: f64,
    pub fbg_meas: f64,
    pub y_s: Option<f64>,
    pub x_s: Option<f64>,
    pub k_p_hat: Option<f64>,
    pub k_s_hat: Option<f64>,
    pub cost_total: Option<f64>,
}

/// A simulated subject with its traces and measures.
#[derive(Debug, Clone)]
pub struct SubjectOutcome {
    pub index: usize,
    pub params: SubjectParams,
    pub traits: Option<PhgTraits>,
    pub days: Vec<DayRow>,
    pub metrics: Option<RunMetrics>,
    pub fbg_shares: Option<FbgShares>,
    pub max_cond_p: Option<f64>,
    pub error: Option<String>,
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub config: ScenarioConfig,
    pub subjects: Vec<SubjectOutcome>,
}

impl RunArtifact {
    pub fn failures(&self) -> impl Iterator<Item = &SubjectOutcome> {
        self.subjects.iter().filter(|s| s.error.is_some())
    }
}

enum Controller {
    Adaos(Box<TitrationEngine>),
    Weekly(StandardOfCare),
    Esc(EscController),
}

struct Decision {
    dose: f64,
    k_p_hat: Option<f64>,
    k_s_hat: Option<f64>,
    cost_total: Option<f64>,
}

impl Controller {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(match cfg.strategy {
            Strategy::Rule202 => Controller::Weekly(StandardOfCare::new(WeeklyRule::Rule202, cfg.rule_initial_dose)),
            Strategy::Step => Controller::Weekly(StandardOfCare::new(WeeklyRule::Step, cfg.rule_initial_dose)),
            Strategy::Esc => Controller::Esc(EscController::new(cfg.esc)?),
            _ => Controller::Adaos(Box::new(TitrationEngine::new(cfg.engine.clone())?)),
        })
    }

    /// Dose for day `day` from the morning's readings; `y_s` is `None` when
    /// the controller gets no score.
    fn decide(&mut self, day: u64, y_g: f64, y_s: Option<f64>) -> Result<Decision> {
        match self {
            Controller::Adaos(engine) => {
                let h = engine.config().max_score;
                let rec = engine.step(y_g, y_s.unwrap_or(h))?;
                Ok(Decision {
                    dose: rec.dose,
                    k_p_hat: Some(rec.theta_hat.k_p),
                    k_s_hat: Some(rec.theta_hat.k_s),
                    cost_total: Some(rec.cost.total),
                })
            }
            Controller::Weekly(rule) => {
                Ok(Decision { dose: rule.step(day, y_g)?, k_p_hat: None, k_s_hat: None, cost_total: None })
            }
            Controller::Esc(esc) => {
                let cost = esc_cost(y_g, esc.config().reference);
                Ok(Decision { dose: esc.step(y_g)?, k_p_hat: None, k_s_hat: None, cost_total: Some(cost) })
            }
        }
    }

    fn max_cond(&self) -> Option<f64> {
        match self {
            Controller::Adaos(e) => Some(e.max_condition_number()),
            Controller::Esc(e) => Some(e.max_condition_number()),
            Controller::Weekly(_) => None,
        }
    }
}

/// Parameters of subject `index`, identical across strategies.
pub fn cohort_subject(cfg: &ScenarioConfig, index: usize) -> Result<SubjectParams> {
    let seed = subject_seed(cfg.master_seed, index);
    let p_egp = match cfg.model {
        ModelFamily::M1 => {
            let sweep = egp_sweep();
            Some(sweep[index % sweep.len()])
        }
        _ => None,
    };
    sample_subject(cfg.model, seed, p_egp, &cfg.physiology)
}

/// PHG traits of a subject, drawn first from its sensor stream.
fn subject_traits(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> PhgTraits {
    let mut traits = sample_traits(rng);
    traits.scale = cfg.score_scale;
    traits.max_score = cfg.engine.max_score;
    traits
}

/// Cohort manifest: parameters and PHG traits of every subject.
pub fn cohort_manifest(cfg: &ScenarioConfig) -> Result<Vec<(SubjectParams, Option<PhgTraits>)>> {
    cfg.validate()?;
    (0..cfg.n_subjects)
        .map(|i| {
            let params = cohort_subject(cfg, i)?;
            let traits = (cfg.model != ModelFamily::M1)
                .then(|| subject_traits(cfg, &mut RngPurpose::Sensors.rng(params.rng_seed)));
            Ok((params, traits))
        })
        .collect()
}

/// Runs every subject of the scenario on a pool of `cfg.workers` threads.
///
/// Results are ordered by subject index and do not depend on the pool size.
/// A subject that fails keeps the days it completed and records the error.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunArtifact> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let subjects = pool.install(|| {
        (0..cfg.n_subjects).into_par_iter().map(|i| simulate_subject(cfg, i)).collect::<Result<Vec<_>>>()
    })?;
    Ok(RunArtifact { config: cfg.clone(), subjects })
}

/// Simulates one subject. Only parameter sampling errors are returned;
/// simulation errors end up in the outcome.
pub fn simulate_subject(cfg: &ScenarioConfig, index: usize) -> Result<SubjectOutcome> {
    let params = cohort_subject(cfg, index)?;
    let mut outcome = SubjectOutcome {
        index,
        params: params.clone(),
        traits: None,
        days: Vec::with_capacity(cfg.n_days as usize),
        metrics: None,
        fbg_shares: None,
        max_cond_p: None,
        error: None,
    };
    let result = match cfg.model {
        ModelFamily::M1 => run_daily(cfg, &params, &mut outcome),
        _ => run_continuous(cfg, &params, &mut outcome),
    };
    if let Err(e) = result {
        outcome.metrics = None;
        outcome.fbg_shares = None;
        outcome.error = Some(e.to_string());
    }
    Ok(outcome)
}

fn finish(outcome: &mut SubjectOutcome, bg: &[f64], xs: &[f64], max_score: f64) -> Result<()> {
    let doses: Vec<f64> = outcome.days.iter().map(|d| d.dose_u).collect();
    let fbg: Vec<f64> = outcome.days.iter().map(|d| d.fbg_true).collect();
    outcome.metrics = Some(compute_metrics(bg, xs, max_score, &doses)?);
    outcome.fbg_shares = Some(FbgShares::from_samples(&fbg)?);
    Ok(())
}

fn run_daily(cfg: &ScenarioConfig, params: &SubjectParams, outcome: &mut SubjectOutcome) -> Result<()> {
    let mut subject = DailySubject::new(params, cfg.daily.clone())?;
    let mut controller = Controller::new(cfg)?;
    for day in 1..=cfg.n_days {
        let fbg = subject.fbg();
        let decision = controller.decide(day, fbg, None).map_err(|e| at_day(e, outcome.index, day))?;
        outcome.days.push(DayRow {
            subject_id: outcome.index,
            day,
            dose_u: decision.dose,
            fbg_true: fbg,
            fbg_meas: fbg,
            y_s: None,
            x_s: None,
            k_p_hat: decision.k_p_hat,
            k_s_hat: decision.k_s_hat,
            cost_total: decision.cost_total,
        });
        subject.advance_day(decision.dose).map_err(|e| at_day(e, outcome.index, day))?;
    }
    outcome.max_cond_p = controller.max_cond();
    let fbg: Vec<f64> = outcome.days.iter().map(|d| d.fbg_true).collect();
    finish(outcome, &fbg, &[], cfg.engine.max_score)
}

fn run_continuous(cfg: &ScenarioConfig, params: &SubjectParams, outcome: &mut SubjectOutcome) -> Result<()> {
    let mut sensor_rng = RngPurpose::Sensors.rng(params.rng_seed);
    let traits = subject_traits(cfg, &mut sensor_rng);
    outcome.traits = Some(traits);
    let mut subject = VirtualSubject::new(params.clone(), cfg.physiology.clone(), cfg.dt_min)?;
    let mut controller = Controller::new(cfg)?;
    let mut history = BgHistory::new(traits.h_days, cfg.dt_min);
    let steps_per_day = (MINUTES_PER_DAY / cfg.dt_min) as usize;
    let mut bg = Vec::with_capacity(steps_per_day * cfg.n_days as usize);
    let mut xs = Vec::with_capacity(cfg.n_days as usize);
    let mut prev_score = traits.max_score;
    let missing_enabled = cfg.strategy == Strategy::AdaosPf;

    for day in 1..=cfg.n_days {
        let start = (day - 1) * MINUTES_PER_DAY;
        let mut record = |x: f64| {
            bg.push(x);
            history.push(x);
        };
        subject.advance_to(start + FASTING_MINUTE, &mut record).map_err(|e| at_day(e, outcome.index, day))?;

        let fbg = subject.bg();
        let y_g = smbg_measure(fbg, &cfg.smbg, &mut sensor_rng);
        let score = phg_score(history.ratio(), &traits, fbg, prev_score, missing_enabled, &mut sensor_rng);
        prev_score = score.y_s;
        xs.push(score.x_s);

        let seen = cfg.strategy.uses_scores().then_some(score.y_s);
        let decision = controller.decide(day, y_g, seen).map_err(|e| at_day(e, outcome.index, day))?;
        outcome.days.push(DayRow {
            subject_id: outcome.index,
            day,
            dose_u: decision.dose,
            fbg_true: fbg,
            fbg_meas: y_g,
            y_s: Some(score.y_s),
            x_s: Some(score.x_s),
            k_p_hat: decision.k_p_hat,
            k_s_hat: decision.k_s_hat,
            cost_total: decision.cost_total,
        });

        let mut record = |x: f64| {
            bg.push(x);
            history.push(x);
        };
        subject.advance_to(start + INJECTION_MINUTE, &mut record).map_err(|e| at_day(e, outcome.index, day))?;
        subject.inject(decision.dose);
        subject.advance_to(start + MINUTES_PER_DAY, &mut record).map_err(|e| at_day(e, outcome.index, day))?;
    }
    outcome.max_cond_p = controller.max_cond();
    finish(outcome, &bg, &xs, traits.max_score)
}

fn at_day(e: Error, subject: usize, day: u64) -> Error {
    Error::Simulation { subject, reason: format!("day {day}: {e}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(strategy: Strategy) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::preset(strategy, None);
        cfg.n_subjects = 3;
        cfg.n_days = 15;
        cfg.master_seed = 7;
        cfg.workers = 2;
        cfg
    }

    #[test]
    fn weekly_rule_changes_only_on_week_boundaries() {
        let run = run_scenario(&small(Strategy::Rule202)).unwrap();
        for s in &run.subjects {
            assert!(s.error.is_none());
            for w in s.days.windows(2) {
                let change = w[1].dose_u - w[0].dose_u;
                if w[1].day % 7 != 0 {
                    assert_eq!(change, 0.0);
                } else {
                    assert!([-2.0, 0.0, 2.0].contains(&change));
                }
            }
        }
    }

    #[test]
    fn same_cohort_across_strategies() {
        let a = run_scenario(&small(Strategy::Adaos)).unwrap();
        let b = run_scenario(&small(Strategy::Esc)).unwrap();
        for (x, y) in a.subjects.iter().zip(&b.subjects) {
            assert_eq!(x.params, y.params);
            assert_eq!(x.traits, y.traits);
            assert_eq!(x.days[0].fbg_true, y.days[0].fbg_true);
        }
    }

    #[test]
    fn adaos_gains_stay_in_box() {
        let run = run_scenario(&small(Strategy::Adaos)).unwrap();
        for row in run.subjects.iter().flat_map(|s| &s.days) {
            let (kp, ks) = (row.k_p_hat.unwrap(), row.k_s_hat.unwrap());
            assert!((0.0..=2.0).contains(&kp) && (0.0..=2.0).contains(&ks));
            assert!(row.dose_u >= 0.0);
        }
    }

    #[test]
    fn daily_model_has_no_scores() {
        let mut cfg = small(Strategy::AdaosC);
        cfg.n_subjects = 2;
        let run = run_scenario(&cfg).unwrap();
        let s = &run.subjects[1];
        assert_eq!(s.params.p_egp, Some(115.0));
        assert!(s.days.iter().all(|d| d.y_s.is_none() && d.fbg_meas == d.fbg_true));
        assert!(s.metrics.unwrap().phg_gt_08.is_nan());
    }
}
