use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Deserialize;

use cogniplay_core::assessment::{
    canonical_answers, AssessmentResponse, Choice, CognitiveCore, Instrument,
};
use cogniplay_core::course::CourseGraph;
use cogniplay_core::ids::LearnerId;
use cogniplay_core::platform::PlatformSetup;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// How one kind of simulated learner behaves.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentProfile {
    /// Chance of answering any single question correctly.
    pub accuracy: f64,
    /// Attempts allowed per quiz, first included. Absent means unbounded.
    #[serde(default)]
    pub persistence: Option<u32>,
    /// Seconds between actions, drawn uniformly from this inclusive range.
    #[serde(default = "default_think")]
    pub think_secs: [u32; 2],
    /// Assessment answers as 14 letters; defaults to the core's canonical set.
    #[serde(default)]
    pub answers: Option<String>,
    /// Target mean rating per statement id. Defaults to the per-core
    /// fixture means.
    #[serde(default)]
    pub evaluation_means: Option<BTreeMap<String, f64>>,
}

fn default_think() -> [u32; 2] {
    [20, 180]
}

impl Default for AgentProfile {
    fn default() -> Self {
        Self {
            accuracy: 0.9,
            persistence: Some(5),
            think_secs: default_think(),
            answers: None,
            evaluation_means: None,
        }
    }
}

impl AgentProfile {
    pub fn answer_vector(&self, core: CognitiveCore) -> Result<Vec<Choice>, ConfigError> {
        let Some(s) = &self.answers else {
            return Ok(canonical_answers(core).to_vec());
        };
        let answers = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c.to_ascii_uppercase() {
                'A' => Ok(Choice::A),
                'B' => Ok(Choice::B),
                other => Err(ConfigError::Invalid(format!(
                    "answer {other:?} is not A or B"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let resp =
            AssessmentResponse::from_sequence(LearnerId(0), &answers, DateTime::<Utc>::UNIX_EPOCH);
        let got = Instrument::abridged()
            .determine_cognitive_core(&resp)
            .map_err(|e| ConfigError::Invalid(format!("{core} answers: {e}")))?;
        if got != core {
            return Err(ConfigError::Invalid(format!(
                "{core} answers score as {got}"
            )));
        }
        Ok(answers)
    }

    fn validate(&self, core: CognitiveCore) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(ConfigError::Invalid(format!(
                "{core} accuracy must lie in [0, 1]"
            )));
        }
        if self.persistence == Some(0) {
            return Err(ConfigError::Invalid(format!(
                "{core} persistence must be at least 1"
            )));
        }
        if self.think_secs[0] == 0 || self.think_secs[0] > self.think_secs[1] {
            return Err(ConfigError::Invalid(format!(
                "{core} think_secs must be [lo, hi] with 1 <= lo <= hi"
            )));
        }
        for (k, &v) in self.evaluation_means.iter().flatten() {
            if k.parse::<u8>().is_err() || !(1.0..=5.0).contains(&v) {
                return Err(ConfigError::Invalid(format!(
                    "{core} evaluation mean {k} = {v}"
                )));
            }
        }
        self.answer_vector(core).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortConfig {
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: DateTime<Utc>,
    /// Learners enroll at uniformly drawn offsets within this many seconds.
    #[serde(default = "default_window")]
    pub enroll_window_secs: u32,
    /// Course definition file, relative to the config. Absent means the
    /// shipped course.
    #[serde(default)]
    pub course: Option<PathBuf>,
    #[serde(default)]
    pub pass_threshold: Option<u8>,
    pub counts: BTreeMap<CognitiveCore, u32>,
    /// Gender label counts; must sum to the cohort size when given.
    #[serde(default)]
    pub genders: BTreeMap<String, u32>,
    #[serde(default)]
    pub profiles: BTreeMap<CognitiveCore, AgentProfile>,
    /// Share of finishers who answer the survey.
    #[serde(default = "one")]
    pub evaluation_rate: f64,
    /// Spread of individual ratings around the target means.
    #[serde(default = "default_sd")]
    pub evaluation_sd: f64,
    /// Treat a deployed element that never surfaces as a failure.
    #[serde(default)]
    pub require_coverage: bool,
    /// Cap on actions per agent, so that hopeless agents end.
    #[serde(default = "default_max_actions")]
    pub max_actions: u32,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_start() -> DateTime<Utc> {
    "2022-04-13T08:00:00Z".parse().expect("valid")
}
fn default_window() -> u32 {
    14 * 24 * 3600
}
fn one() -> f64 {
    1.0
}
fn default_sd() -> f64 {
    0.7
}
fn default_max_actions() -> u32 {
    5000
}

const REFERENCE_COHORT: &str = include_str!("../data/reference_cohort.toml");

impl CohortConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.into(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&src)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// The 37-learner reference cohort: 15 ST, 8 SF, 8 NT, 6 NF.
    pub fn reference_cohort() -> Self {
        Self::from_toml(REFERENCE_COHORT).expect("shipped config is valid")
    }

    pub fn size(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn profile(&self, core: CognitiveCore) -> AgentProfile {
        self.profiles.get(&core).cloned().unwrap_or_default()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.size() == 0 {
            return Err(ConfigError::Invalid("the cohort is empty".into()));
        }
        let g: u32 = self.genders.values().sum();
        if !self.genders.is_empty() && g != self.size() {
            return Err(ConfigError::Invalid(format!(
                "genders sum to {g} but the cohort has {}",
                self.size()
            )));
        }
        if !(0.0..=1.0).contains(&self.evaluation_rate) {
            return Err(ConfigError::Invalid(
                "evaluation_rate must lie in [0, 1]".into(),
            ));
        }
        if !(self.evaluation_sd >= 0.0 && self.evaluation_sd.is_finite()) {
            return Err(ConfigError::Invalid(
                "evaluation_sd must be finite and non-negative".into(),
            ));
        }
        if self.pass_threshold.is_some_and(|t| !(1..=100).contains(&t)) {
            return Err(ConfigError::Invalid(
                "pass_threshold must lie in 1..=100".into(),
            ));
        }
        for (&core, p) in &self.profiles {
            p.validate(core)?;
        }
        Ok(())
    }

    pub fn platform_setup(&self) -> Result<PlatformSetup, ConfigError> {
        let mut setup = match &self.course {
            None => PlatformSetup::standard(),
            Some(rel) => {
                let path = match &self.base_dir {
                    Some(b) if rel.is_relative() => b.join(rel),
                    _ => rel.clone(),
                };
                let src = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                let graph = CourseGraph::from_toml(&src).map_err(|e| ConfigError::Io {
                    path,
                    message: e.to_string(),
                })?;
                PlatformSetup::with_courses(vec![graph])
            }
        };
        setup.pass_threshold_override = self.pass_threshold;
        Ok(setup)
    }
}
