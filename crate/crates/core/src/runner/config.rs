use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::baselines::EscConfig;
use crate::cohort::{DailyConstants, ModelFamily, PhysioConstants};
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::sensors::{ScoreScale, SmbgParams};

/// Titration strategy of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Adaos,
    AdaosH5,
    AdaosF,
    AdaosPf,
    AdaosC,
    Rule202,
    Step,
    Esc,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::Adaos,
        Strategy::AdaosH5,
        Strategy::AdaosF,
        Strategy::AdaosPf,
        Strategy::AdaosC,
        Strategy::Rule202,
        Strategy::Step,
        Strategy::Esc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Adaos => "adaos",
            Strategy::AdaosH5 => "adaos_h5",
            Strategy::AdaosF => "adaos_f",
            Strategy::AdaosPf => "adaos_pf",
            Strategy::AdaosC => "adaos_c",
            Strategy::Rule202 => "rule202",
            Strategy::Step => "step",
            Strategy::Esc => "esc",
        }
    }

    pub fn is_adaos(&self) -> bool {
        matches!(
            self,
            Strategy::Adaos | Strategy::AdaosH5 | Strategy::AdaosF | Strategy::AdaosPf | Strategy::AdaosC
        )
    }

    /// Whether the strategy's controller reads PHG scores.
    pub fn uses_scores(&self) -> bool {
        matches!(self, Strategy::Adaos | Strategy::AdaosH5 | Strategy::AdaosPf)
    }

    /// Model family used when none is given.
    pub fn default_model(&self) -> ModelFamily {
        match self {
            Strategy::AdaosC => ModelFamily::M1,
            _ => ModelFamily::M2,
        }
    }

    /// Engine settings of the named scenario.
    pub fn engine_preset(&self) -> EngineConfig {
        let base = EngineConfig::default();
        match self {
            Strategy::AdaosH5 => EngineConfig { max_score: 5.0, ..base },
            Strategy::AdaosF => EngineConfig { kp0: 0.8, ks0: 0.0, freeze_ks: true, ..base },
            Strategy::AdaosC => EngineConfig { kp0: 1.4, ks0: 0.0, freeze_ks: true, reference: 5.0, ..base },
            _ => base,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        let key = match key.as_str() {
            "202" => "rule202",
            other => other,
        };
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == key)
            .ok_or_else(|| Error::Config(format!("unknown strategy '{s}'")))
    }
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub strategy: Strategy,
    pub model: ModelFamily,
    pub n_subjects: usize,
    pub n_days: u64,
    pub master_seed: u64,
    /// Worker threads; 0 picks the number of cores. Never affects results.
    #[serde(skip)]
    pub workers: usize,
    /// Euler-Maruyama step in minutes.
    pub dt_min: u64,
    pub engine: EngineConfig,
    pub score_scale: ScoreScale,
    pub physiology: PhysioConstants,
    pub daily: DailyConstants,
    pub smbg: SmbgParams,
    pub esc: EscConfig,
    /// Starting dose of the weekly rules, U.
    pub rule_initial_dose: f64,
}

/// Scenario file contents: everything except the strategy is optional and
/// falls back to the strategy preset. `engine` may be a partial object.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub strategy: Option<Strategy>,
    pub model: Option<ModelFamily>,
    pub n_subjects: Option<usize>,
    pub n_days: Option<u64>,
    pub master_seed: Option<u64>,
    pub workers: Option<usize>,
    pub dt_min: Option<u64>,
    pub engine: Option<Value>,
    pub score_scale: Option<ScoreScale>,
    pub physiology: Option<PhysioConstants>,
    pub daily: Option<DailyConstants>,
    pub smbg: Option<SmbgParams>,
    pub esc: Option<EscConfig>,
    pub rule_initial_dose: Option<f64>,
}

impl ScenarioConfig {
    /// The named scenario with its defaults for `model`.
    pub fn preset(strategy: Strategy, model: Option<ModelFamily>) -> Self {
        let model = model.unwrap_or_else(|| strategy.default_model());
        let (n_subjects, n_days) = match model {
            ModelFamily::M1 => (61, 300),
            _ => (200, 365),
        };
        Self {
            name: strategy.as_str().to_string(),
            strategy,
            model,
            n_subjects,
            n_days,
            master_seed: 1,
            workers: 0,
            dt_min: 5,
            engine: strategy.engine_preset(),
            score_scale: if strategy == Strategy::AdaosH5 { ScoreScale::Discrete } else { ScoreScale::Continuous },
            physiology: PhysioConstants::default(),
            daily: DailyConstants::default(),
            smbg: SmbgParams::default(),
            esc: EscConfig::default(),
            rule_initial_dose: 10.0,
        }
    }

    pub fn from_file_contents(file: ScenarioFile) -> Result<Self> {
        let strategy = file.strategy.ok_or_else(|| Error::Config("scenario file needs a 'strategy'".into()))?;
        let mut cfg = Self::preset(strategy, file.model);
        if let Some(name) = file.name {
            cfg.name = name;
        }
        if let Some(v) = file.n_subjects {
            cfg.n_subjects = v;
        }
        if let Some(v) = file.n_days {
            cfg.n_days = v;
        }
        if let Some(v) = file.master_seed {
            cfg.master_seed = v;
        }
        if let Some(v) = file.workers {
            cfg.workers = v;
        }
        if let Some(v) = file.dt_min {
            cfg.dt_min = v;
        }
        if let Some(overrides) = file.engine {
            cfg.engine = merge_engine(&cfg.engine, overrides)?;
        }
        if let Some(v) = file.score_scale {
            cfg.score_scale = v;
        }
        if let Some(v) = file.physiology {
            cfg.physiology = v;
        }
        if let Some(v) = file.daily {
            cfg.daily = v;
        }
        if let Some(v) = file.smbg {
            cfg.smbg = v;
        }
        if let Some(v) = file.esc {
            cfg.esc = v;
        }
        if let Some(v) = file.rule_initial_dose {
            cfg.rule_initial_dose = v;
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid scenario JSON: {e}")))?;
        Self::from_file_contents(file)
    }

    /// Loads `arg` as a JSON file if it exists, otherwise as a scenario name.
    pub fn load(arg: &str) -> Result<Self> {
        let path = Path::new(arg);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
            Self::from_json(&text)
        } else {
            Ok(Self::preset(arg.parse()?, None))
        }
    }

    /// Re-targets the scenario at another model family, keeping explicit values.
    pub fn with_model(mut self, model: ModelFamily) -> Self {
        if model != self.model {
            let preset = Self::preset(self.strategy, Some(model));
            if self.n_subjects == Self::preset(self.strategy, Some(self.model)).n_subjects {
                self.n_subjects = preset.n_subjects;
            }
            if self.n_days == Self::preset(self.strategy, Some(self.model)).n_days {
                self.n_days = preset.n_days;
            }
            self.model = model;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Config("a scenario needs at least one subject".into()));
        }
        if self.n_days == 0 {
            return Err(Error::Config("a scenario needs at least one day".into()));
        }
        match (self.strategy, self.model) {
            (Strategy::AdaosC, ModelFamily::M2 | ModelFamily::M3) => {
                return Err(Error::Config("adaos_c runs on the daily fasting-glucose model m1 only".into()));
            }
            (s, ModelFamily::M1) if s.uses_scores() => {
                return Err(Error::Config(format!("{s} needs PHG scores, which model m1 does not produce")));
            }
            _ => {}
        }
        self.engine.validate()?;
        if self.strategy == Strategy::AdaosH5 && self.score_scale != ScoreScale::Discrete {
            return Err(Error::Config("adaos_h5 uses the discrete score scale".into()));
        }
        if self.score_scale == ScoreScale::Discrete && self.engine.max_score.fract() != 0.0 {
            return Err(Error::Config("a discrete score scale needs an integer maximum".into()));
        }
        self.physiology.validate()?;
        self.daily.validate()?;
        self.smbg.validate()?;
        self.esc.validate()?;
        if !(self.rule_initial_dose >= 0.0 && self.rule_initial_dose.is_finite()) {
            return Err(Error::Config("rule_initial_dose must be non-negative".into()));
        }
        if !(1..=10).contains(&self.dt_min) || 1440 % self.dt_min != 0 || 345 % self.dt_min != 0 {
            return Err(Error::Config(format!("dt_min {} must divide 05:45 and lie in 1..=10", self.dt_min)));
        }
        Ok(())
    }
}

fn merge_engine(base: &EngineConfig, overrides: Value) -> Result<EngineConfig> {
    let Value::Object(over) = overrides else {
        return Err(Error::Config("'engine' must be a JSON object".into()));
    };
    let mut merged = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    let target = merged.as_object_mut().expect("engine config serializes to an object");
    for (key, value) in over {
        if !target.contains_key(&key) {
            return Err(Error::Config(format!("unknown engine field '{key}'")));
        }
        if key == "optimizer" {
            if let (Some(Value::Object(dst)), Value::Object(src)) = (target.get_mut("optimizer"), &value) {
                for (k, v) in src {
                    dst.insert(k.clone(), v.clone());
                }
                continue;
            }
        }
        target.insert(key, value);
    }
    serde_json::from_value(merged).map_err(|e| Error::Config(format!("invalid engine settings: {e}")))
}
