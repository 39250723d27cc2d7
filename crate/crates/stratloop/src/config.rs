//! The experiment document.
//!
//! ```json
//! {
//!   "spec_version": 1,
//!   "name": "uniform_linear_r005",
//!   "groups": [ { "id": "i", "population": { ... }, "bias": 0.1, "cost": [[5, 0], [0, 5]] } ],
//!   "retrain": { "n": 2000, "k": 100, "rounds": 15, "trials": 100, "seed": 42 },
//!   "fairness": "none",
//!   "output": { "dir": "out" }
//! }
//! ```
//!
//! Groups may also be given as `{ "file": "group.json" }`, resolved
//! relative to the config file, with optional `id` and `bias` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stratloop_core::multigroup::FairnessMode;
use stratloop_core::retrain::{AnnotationMode, HumanSource, LearnerMode, MemoryMode};
use stratloop_core::{GroupSpec, RetrainConfig, SPEC_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    File {
        file: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<f64>,
    },
    Inline(GroupSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub per_trial_csv: bool,
    pub aggregate_csv: bool,
    pub summary_json: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            per_trial_csv: true,
            aggregate_csv: true,
            summary_json: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub groups: Vec<GroupRef>,
    #[serde(default)]
    pub retrain: RetrainConfig,
    #[serde(default)]
    pub fairness: FairnessMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_tolerance: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker threads; `STRATLOOP_THREADS` caps this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

/// One schema problem, located by a dotted path into the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Validation failure carrying every issue found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub Vec<Issue>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, issue) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn issue(path: impl Into<String>, message: impl fmt::Display) -> Issue {
    Issue {
        path: path.into(),
        message: message.to_string(),
    }
}

/// A config whose group references have been loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub groups: Vec<GroupSpec>,
}

impl ExperimentConfig {
    /// Parses a config file. Parse failures come back as a single issue
    /// with the JSON line and column.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(vec![issue(path.display().to_string(), e)]))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(vec![issue("$", e)]))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Loads file references (relative to `base`) and checks every field.
    pub fn resolve(&self, base: Option<&Path>) -> Result<ResolvedConfig, ConfigError> {
        let mut issues = Vec::new();
        if self.spec_version != SPEC_VERSION {
            issues.push(issue(
                "spec_version",
                format!("expected {SPEC_VERSION}, found {}", self.spec_version),
            ));
        }
        if self.groups.is_empty() {
            issues.push(issue("groups", "at least one group is required"));
        }
        let mut groups = Vec::with_capacity(self.groups.len());
        for (k, g) in self.groups.iter().enumerate() {
            let path = format!("groups[{k}]");
            match load_group(g, base) {
                Ok(spec) => {
                    if let Err(e) = spec.validate() {
                        issues.push(issue(&path, e));
                    }
                    groups.push(spec);
                }
                Err(e) => issues.push(issue(&path, format!("{e:#}"))),
            }
        }
        for (a, ga) in groups.iter().enumerate() {
            if groups[..a].iter().any(|gb| gb.id == ga.id) {
                issues.push(issue(
                    format!("groups[{a}].id"),
                    format!("duplicate group id {:?}", ga.id),
                ));
            }
        }
        if let Some(first) = groups.first() {
            for (k, g) in groups.iter().enumerate().skip(1) {
                if g.population.dims != first.population.dims {
                    issues.push(issue(
                        format!("groups[{k}].population.dims"),
                        "all groups must share a feature dimension",
                    ));
                }
            }
        }
        let r = &self.retrain;
        if let Err(e) = r.validate() {
            let field = match () {
                _ if r.n == 0 => "retrain.n",
                _ if r.trials == 0 => "retrain.trials",
                _ if r.r.is_some() => "retrain.r",
                _ if !(r.noise_sigma >= 0.0) => "retrain.noise_sigma",
                _ if r.human_source == HumanSource::PostBestResponse => "retrain.k",
                _ => "retrain.train",
            };
            issues.push(issue(field, e));
        }
        if self.fairness.needs_two_groups() && self.groups.len() != 2 {
            issues.push(issue(
                "fairness",
                format!("{:?} needs exactly two groups", self.fairness),
            ));
        }
        if let Some(tol) = self.parity_tolerance {
            if !(tol > 0.0 && tol <= 1.0) {
                issues.push(issue("parity_tolerance", "must lie in (0, 1]"));
            }
        }
        if self.threads == Some(0) {
            issues.push(issue("threads", "must be at least 1"));
        }
        if issues.is_empty() {
            Ok(ResolvedConfig {
                config: self.clone(),
                groups,
            })
        } else {
            Err(ConfigError(issues))
        }
    }

    /// Short description of the retraining variant, written into every
    /// CSV row. Contains no commas.
    pub fn mode_flags(&self) -> String {
        let r = &self.retrain;
        let annotation = match r.annotation {
            AnnotationMode::Hard => "hard",
            AnnotationMode::Probabilistic => "probabilistic",
        };
        let memory = match r.memory {
            MemoryMode::Cumulative => "cumulative",
            MemoryMode::RecentOnly => "recent_only",
        };
        let human = match r.human_source {
            HumanSource::PriorDistribution => "prior",
            HumanSource::PostBestResponse => "post_br",
        };
        let learner = match r.learner {
            LearnerMode::Sgd => "sgd",
            LearnerMode::GroundTruth => "ground_truth",
        };
        let strategic = if r.strategic {
            "strategic"
        } else {
            "nonstrategic"
        };
        let fairness = match self.fairness {
            FairnessMode::None => "none",
            FairnessMode::DpEveryRound => "dp",
            FairnessMode::DisparateStrategies => "disparate",
            FairnessMode::EarlyStop => "early_stop",
        };
        format!(
            "{annotation};{memory};{human};{learner};{strategic};sigma={};fair={fairness}",
            r.noise_sigma
        )
    }
}

fn load_group(g: &GroupRef, base: Option<&Path>) -> anyhow::Result<GroupSpec> {
    match g {
        GroupRef::Inline(spec) => Ok(spec.clone()),
        GroupRef::File { file, id, bias } => {
            let path = match base {
                Some(b) if file.is_relative() => b.join(file),
                _ => file.clone(),
            };
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut spec: GroupSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            if let Some(id) = id {
                spec.id = id.clone();
            }
            if let Some(b) = bias {
                spec.bias = *b;
            }
            Ok(spec)
        }
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<RetrainMode>,
    pub fairness: Option<FairnessMode>,
    pub noise_sigma: Option<f64>,
    pub r: Option<f64>,
    pub rounds: Option<usize>,
}

/// Named retraining variants selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrainMode {
    Original,
    Refined,
    Memoryless,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        let r = &mut self.retrain;
        if let Some(t) = o.trials {
            r.trials = t;
        }
        if let Some(s) = o.seed {
            r.seed = s;
        }
        if let Some(t) = o.rounds {
            r.rounds = t;
        }
        if let Some(s) = o.noise_sigma {
            r.noise_sigma = s;
        }
        if let Some(ratio) = o.r {
            r.k = (ratio * r.n as f64).round() as usize;
            r.r = Some(ratio);
        }
        match o.mode {
            Some(RetrainMode::Original) => {
                r.annotation = AnnotationMode::Hard;
                r.memory = MemoryMode::Cumulative;
            }
            Some(RetrainMode::Refined) => {
                r.annotation = AnnotationMode::Probabilistic;
                r.memory = MemoryMode::Cumulative;
            }
            Some(RetrainMode::Memoryless) => {
                r.annotation = AnnotationMode::Hard;
                r.memory = MemoryMode::RecentOnly;
            }
            None => {}
        }
        if let Some(f) = o.fairness {
            self.fairness = f;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
    }
}
