//! The retraining loop for a single group.
//!
//! Round 0 trains `f_0` on `N` human-annotated samples. Round `t ≥ 1`
//! labels the previous round's post-response agents with `f_{t-1}`, adds
//! `K` human-annotated samples, retrains to get `f_t`, and then measures
//! `f_t` on `N` fresh agents who best-responded to `f_{t-1}`. Those agents
//! are annotated at the start of the next round, so the model-annotated
//! batch added in round `t` has label mean `a_{t-1}` in hard mode.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::learner::{fit_logistic, ground_truth_scorer, Dataset, LinearModel, TrainSettings};
use crate::population::{bernoulli, human_annotate, sample_agents, Agents, GroupSpec};
use crate::response::Responder;
use crate::rng::{hash64, stream, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationMode {
    /// `y = f_{t-1}(x)`
    #[default]
    Hard,
    /// `y ~ Bernoulli(h_{t-1}(x))`
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    #[default]
    Cumulative,
    /// Train only on the two batches added this round.
    RecentOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanSource {
    #[default]
    PriorDistribution,
    /// Annotate `K` of the previous round's post-response agents instead.
    PostBestResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerMode {
    #[default]
    Sgd,
    /// Deploy `clamp(P(Y=1|x) + μ, 0, 1) ≥ 0.5` every round.
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Human,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainConfig {
    /// Agents per round, which is also the size of each model-annotated batch.
    pub n: usize,
    /// Human-annotated samples per round after round 0.
    pub k: usize,
    /// Optional declared `K / N`; checked against `n` and `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Last round `T`; traces hold `T + 1` records.
    pub rounds: usize,
    pub trials: usize,
    pub seed: u64,
    pub annotation: AnnotationMode,
    pub memory: MemoryMode,
    pub human_source: HumanSource,
    pub noise_sigma: f64,
    pub learner: LearnerMode,
    /// When false agents never move.
    pub strategic: bool,
    /// Size of an extra fresh sample used to measure `a_t` and `q_t` with
    /// less noise; 0 disables it.
    pub eval_samples: usize,
    pub train: TrainSettings,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            k: 100,
            r: None,
            rounds: 15,
            trials: 100,
            seed: 0,
            annotation: AnnotationMode::Hard,
            memory: MemoryMode::Cumulative,
            human_source: HumanSource::PriorDistribution,
            noise_sigma: 0.0,
            learner: LearnerMode::Sgd,
            strategic: true,
            eval_samples: 0,
            train: TrainSettings::default(),
        }
    }
}

impl RetrainConfig {
    pub fn ratio(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if let Some(r) = self.r {
            if !(r >= 0.0) || libm::fabs(r * self.n as f64 - self.k as f64) > 0.5 {
                return Err(Error::config(alloc::format!(
                    "k/n = {}/{} does not match r = {}",
                    self.k,
                    self.n,
                    r
                )));
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::config(
                "noise_sigma must be a finite nonnegative number",
            ));
        }
        if self.human_source == HumanSource::PostBestResponse && self.k > self.n {
            return Err(Error::config("post-best-response human batches need k ≤ n"));
        }
        self.train.validate()
    }
}

/// `S_t`: a multiset of labeled samples tagged with provenance and round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub dims: usize,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub provenance: Vec<Provenance>,
    pub rounds: Vec<u32>,
}

impl TrainingSet {
    pub fn new(dims: usize) -> Self {
        Self {
            dims,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    pub fn push_batch(
        &mut self,
        features: &[f64],
        labels: &[u8],
        provenance: Provenance,
        round: usize,
    ) {
        debug_assert_eq!(features.len(), labels.len() * self.dims);
        self.features.extend_from_slice(features);
        self.labels.extend_from_slice(labels);
        self.provenance
            .extend(core::iter::repeat_n(provenance, labels.len()));
        self.rounds
            .extend(core::iter::repeat_n(round as u32, labels.len()));
    }

    pub fn label_mean(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }

    pub fn count(&self, provenance: Provenance, round: usize) -> usize {
        self.provenance
            .iter()
            .zip(&self.rounds)
            .filter(|(p, r)| **p == provenance && **r as usize == round)
            .count()
    }

    pub fn as_dataset(&self) -> Result<Dataset<'_>> {
        Dataset::new(self.dims, &self.features, &self.labels)
    }
}

/// Everything measured in one round of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `f_t`, with the threshold actually deployed.
    pub model: LinearModel,
    /// Fraction of this round's agents accepted by `f_t`.
    pub a: f64,
    /// True-label mean of this round's agents.
    pub q: f64,
    /// `|a - q|`
    pub delta: f64,
    /// Label mean of `S_t`.
    pub qbar: f64,
    pub theta: f64,
    /// Threshold chosen without a fairness constraint; equals `theta`
    /// unless a fairness policy moved it.
    pub theta_unconstrained: f64,
    /// Acceptance rate at `theta_unconstrained`.
    pub a_unconstrained: f64,
    /// Mean score `E[h_t]` over this round's agents.
    pub a_soft: f64,
    pub moved_fraction: f64,
    pub training_size: usize,
    /// Label mean of the model-annotated batch added this round.
    pub model_label_mean: Option<f64>,
    /// Label mean of the human-annotated batch added this round; with
    /// post-response human annotation this is `q*_{t-1}`.
    pub human_label_mean: Option<f64>,
    /// `(a_t, q_t)` on the extra evaluation sample, when enabled.
    pub eval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Fitted,
    Recorded,
}

/// State of one trial for one group between rounds.
#[derive(Debug, Clone)]
pub struct TrialState {
    round: usize,
    stage: Stage,
    set: TrainingSet,
    model: LinearModel,
    previous: Option<LinearModel>,
    pending: Option<Agents>,
    model_label_mean: Option<f64>,
    human_label_mean: Option<f64>,
    theta_unconstrained: f64,
    annotation: AnnotationMode,
}

fn fit_model(
    set: &TrainingSet,
    group: &GroupSpec,
    cfg: &RetrainConfig,
    rng: &mut SimRng,
) -> Result<LinearModel> {
    match cfg.learner {
        LearnerMode::GroundTruth => ground_truth_scorer(group),
        LearnerMode::Sgd => {
            let settings = TrainSettings {
                seed: hash64(cfg.train.seed, rng.random()),
                ..cfg.train.clone()
            };
            fit_logistic(
                &set.as_dataset()?,
                &settings,
                group.classifier_features.as_deref(),
            )
        }
    }
}

fn mean_u8(xs: &[u8]) -> f64 {
    xs.iter().map(|&y| y as f64).sum::<f64>() / xs.len() as f64
}

impl TrialState {
    /// Round 0: `S_0` is `N` human-annotated draws from `P_X`, and `f_0` is
    /// fit on it. Call [`finish_round`](Self::finish_round) next.
    pub fn init(group: &GroupSpec, cfg: &RetrainConfig, rng: &mut SimRng) -> Result<Self> {
        cfg.validate()?;
        let dims = group.population.dims;
        let features = group.population.sample_features(cfg.n, rng);
        let labels = human_annotate(group, &features, rng)?;
        let mut set = TrainingSet::new(dims);
        set.push_batch(&features, &labels, Provenance::Human, 0);
        let model = fit_model(&set, group, cfg, rng)?;
        Ok(Self {
            round: 0,
            stage: Stage::Fitted,
            theta_unconstrained: model.threshold,
            human_label_mean: Some(mean_u8(&labels)),
            model_label_mean: None,
            set,
            model,
            previous: None,
            pending: None,
            annotation: cfg.annotation,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn training_set(&self) -> &TrainingSet {
        &self.set
    }

    /// The model fit this round (`f_t`).
    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    /// Overrides how this group's model-annotated batches are labeled.
    pub fn set_annotation(&mut self, mode: AnnotationMode) {
        self.annotation = mode;
    }

    /// Moves the deployed threshold of `f_t` before it is evaluated.
    pub fn set_threshold(&mut self, theta: f64, theta_unconstrained: f64) {
        self.model.threshold = theta;
        self.theta_unconstrained = theta_unconstrained;
    }

    /// Annotates the pending agents with `f_{t-1}`, adds the human batch,
    /// and fits `f_t`.
    pub fn begin_round(
        &mut self,
        group: &GroupSpec,
        cfg: &RetrainConfig,
        rng: &mut SimRng,
    ) -> Result<()> {
        if self.stage != Stage::Recorded {
            return Err(Error::config(
                "begin_round called before the previous round was recorded",
            ));
        }
        let t = self.round + 1;
        if t > cfg.rounds {
            return Err(Error::RoundOverflow {
                round: t,
                horizon: cfg.rounds,
            });
        }
        let pending = self.pending.take().ok_or(Error::EmptyData)?;
        let prev = &self.model;
        let model_labels: Vec<u8> = match self.annotation {
            AnnotationMode::Hard => (0..pending.len())
                .map(|i| prev.accepts(pending.feature(i)) as u8)
                .collect(),
            AnnotationMode::Probabilistic => (0..pending.len())
                .map(|i| bernoulli(rng, prev.score_of_margin(prev.margin(pending.feature(i)))))
                .collect(),
        };
        let human_features = match cfg.human_source {
            HumanSource::PriorDistribution => group.population.sample_features(cfg.k, rng),
            HumanSource::PostBestResponse => pending.features[..cfg.k * pending.dims].to_vec(),
        };
        let human_labels = human_annotate(group, &human_features, rng)?;
        if cfg.memory == MemoryMode::RecentOnly {
            self.set = TrainingSet::new(self.set.dims);
        }
        self.set
            .push_batch(&pending.features, &model_labels, Provenance::Model, t);
        self.set
            .push_batch(&human_features, &human_labels, Provenance::Human, t);
        self.model_label_mean = Some(mean_u8(&model_labels));
        self.human_label_mean = (cfg.k > 0).then(|| mean_u8(&human_labels));
        let model = fit_model(&self.set, group, cfg, rng)?;
        self.theta_unconstrained = model.threshold;
        self.previous = Some(core::mem::replace(&mut self.model, model));
        self.round = t;
        self.stage = Stage::Fitted;
        Ok(())
    }

    fn draw_agents(
        &self,
        group: &GroupSpec,
        cfg: &RetrainConfig,
        n: usize,
        rng: &mut SimRng,
    ) -> Result<(Agents, usize)> {
        let mut agents = sample_agents(&group.population, n, rng)?;
        let mut moved = 0;
        if let (true, Some(prev)) = (cfg.strategic, &self.previous) {
            let responder = Responder::new(prev, &group.cost)?;
            let d = agents.dims;
            for i in 0..agents.len() {
                let out = responder.respond(
                    &agents.features[i * d..(i + 1) * d],
                    agents.labels[i],
                    cfg.noise_sigma,
                    &group.population,
                    rng,
                )?;
                if out.moved {
                    moved += 1;
                    agents.features[i * d..(i + 1) * d].copy_from_slice(&out.new_feature);
                    agents.labels[i] = out.new_label;
                }
            }
        }
        Ok((agents, moved))
    }

    /// Draws this round's `N` agents, lets them respond to `f_{t-1}` and
    /// measures them with `f_t`.
    pub fn finish_round(
        &mut self,
        group: &GroupSpec,
        cfg: &RetrainConfig,
        rng: &mut SimRng,
    ) -> Result<RoundRecord> {
        if self.stage != Stage::Fitted {
            return Err(Error::config("finish_round called twice"));
        }
        let (agents, moved) = self.draw_agents(group, cfg, cfg.n, rng)?;
        let eval = if cfg.eval_samples > 0 {
            let mut eval_rng = stream(rng.random());
            let (extra, _) = self.draw_agents(group, cfg, cfg.eval_samples, &mut eval_rng)?;
            Some((
                self.acceptance(&extra, self.model.threshold),
                extra.label_mean(),
            ))
        } else {
            None
        };
        let a = self.acceptance(&agents, self.model.threshold);
        let a_unconstrained = if self.theta_unconstrained == self.model.threshold {
            a
        } else {
            self.acceptance(&agents, self.theta_unconstrained)
        };
        let a_soft = (0..agents.len())
            .map(|i| {
                self.model
                    .score_of_margin(self.model.margin(agents.feature(i)))
            })
            .sum::<f64>()
            / agents.len() as f64;
        let q = agents.label_mean();
        let record = RoundRecord {
            round: self.round,
            model: self.model.clone(),
            a,
            q,
            delta: libm::fabs(a - q),
            qbar: self.set.label_mean(),
            theta: self.model.threshold,
            theta_unconstrained: self.theta_unconstrained,
            a_unconstrained,
            a_soft,
            moved_fraction: moved as f64 / agents.len() as f64,
            training_size: self.set.len(),
            model_label_mean: self.model_label_mean,
            human_label_mean: self.human_label_mean,
            eval,
        };
        self.pending = Some(agents);
        self.stage = Stage::Recorded;
        Ok(record)
    }

    fn acceptance(&self, agents: &Agents, theta: f64) -> f64 {
        let m = self.model.clone().with_threshold(theta);
        (0..agents.len())
            .filter(|&i| m.accepts(agents.feature(i)))
            .count() as f64
            / agents.len() as f64
    }
}

/// Builds `S_0` and fits `f_0`.
pub fn init_round_zero(
    group: &GroupSpec,
    cfg: &RetrainConfig,
    rng: &mut SimRng,
) -> Result<(TrainingSet, LinearModel)> {
    let s = TrialState::init(group, cfg, rng)?;
    Ok((s.set, s.model))
}

/// Advances a recorded state by one round.
pub fn step(
    state: &mut TrialState,
    group: &GroupSpec,
    cfg: &RetrainConfig,
    rng: &mut SimRng,
) -> Result<RoundRecord> {
    state.begin_round(group, cfg, rng)?;
    state.finish_round(group, cfg, rng)
}

/// Runs rounds `0..=T` and returns one record per round.
pub fn run_trial(
    group: &GroupSpec,
    cfg: &RetrainConfig,
    rng: &mut SimRng,
) -> Result<Vec<RoundRecord>> {
    group.validate()?;
    let mut state = TrialState::init(group, cfg, rng)?;
    let mut out = Vec::with_capacity(cfg.rounds + 1);
    out.push(state.finish_round(group, cfg, rng)?);
    for _ in 0..cfg.rounds {
        out.push(step(&mut state, group, cfg, rng)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{Distribution1D, PopulationSpec};
    use crate::{CostModel, LabelFn};

    fn uniform_group(bias: f64) -> GroupSpec {
        let spec = PopulationSpec::marginal(
            alloc::vec![Distribution1D::Uniform { lo: 0.0, hi: 1.0 }; 2],
            LabelFn::Linear {
                coeffs: alloc::vec![0.5, 0.5],
                intercept: 0.0,
            },
        );
        GroupSpec::new("u", spec, bias, CostModel::scaled_identity(2, 5.0).unwrap())
    }

    fn small_cfg() -> RetrainConfig {
        RetrainConfig {
            n: 200,
            k: 10,
            rounds: 3,
            trials: 1,
            train: TrainSettings {
                epochs: 5,
                ..TrainSettings::default()
            },
            ..RetrainConfig::default()
        }
    }

    #[test]
    fn cumulative_sizes_follow_the_update_rule() {
        let g = uniform_group(0.0);
        let cfg = small_cfg();
        let trace = run_trial(&g, &cfg, &mut stream(1)).unwrap();
        assert_eq!(trace.len(), 4);
        for r in &trace {
            assert_eq!(r.training_size, (r.round + 1) * cfg.n + r.round * cfg.k);
            assert_eq!(r.delta, (r.a - r.q).abs());
        }
    }

    #[test]
    fn default_sizes_match_reference_scale() {
        let g = uniform_group(0.0);
        let cfg = RetrainConfig {
            n: 2000,
            k: 100,
            rounds: 2,
            learner: LearnerMode::GroundTruth,
            ..RetrainConfig::default()
        };
        let mut rng = stream(3);
        let mut state = TrialState::init(&g, &cfg, &mut rng).unwrap();
        assert_eq!(state.training_set().len(), 2000);
        state.finish_round(&g, &cfg, &mut rng).unwrap();
        step(&mut state, &g, &cfg, &mut rng).unwrap();
        let r = step(&mut state, &g, &cfg, &mut rng).unwrap();
        assert_eq!(r.training_size, 6200);
        assert_eq!(state.training_set().count(Provenance::Model, 2), 2000);
        assert_eq!(state.training_set().count(Provenance::Human, 2), 100);
    }

    #[test]
    fn recent_only_keeps_two_batches() {
        let g = uniform_group(0.0);
        let cfg = RetrainConfig {
            memory: MemoryMode::RecentOnly,
            ..small_cfg()
        };
        let trace = run_trial(&g, &cfg, &mut stream(2)).unwrap();
        assert_eq!(trace[0].training_size, cfg.n);
        for r in &trace[1..] {
            assert_eq!(r.training_size, cfg.n + cfg.k);
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let g = uniform_group(0.0);
        let cfg = RetrainConfig {
            rounds: 1,
            ..small_cfg()
        };
        let mut rng = stream(4);
        let mut s = TrialState::init(&g, &cfg, &mut rng).unwrap();
        s.finish_round(&g, &cfg, &mut rng).unwrap();
        step(&mut s, &g, &cfg, &mut rng).unwrap();
        assert!(matches!(
            step(&mut s, &g, &cfg, &mut rng),
            Err(Error::RoundOverflow { .. })
        ));
    }

    #[test]
    fn hard_annotation_copies_previous_decisions() {
        let g = uniform_group(0.0);
        let cfg = small_cfg();
        let mut rng = stream(5);
        let mut s = TrialState::init(&g, &cfg, &mut rng).unwrap();
        let r0 = s.finish_round(&g, &cfg, &mut rng).unwrap();
        let f0 = s.model().clone();
        let pending = s.pending.clone().unwrap();
        s.begin_round(&g, &cfg, &mut rng).unwrap();
        let set = s.training_set();
        let start = cfg.n;
        for i in 0..cfg.n {
            assert_eq!(set.labels[start + i], f0.accepts(pending.feature(i)) as u8);
        }
        assert_eq!(s.model_label_mean, Some(r0.a));
    }

    #[test]
    fn config_ratio_mismatch_is_rejected() {
        let cfg = RetrainConfig {
            r: Some(0.1),
            ..RetrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let ok = RetrainConfig {
            r: Some(0.05),
            ..RetrainConfig::default()
        };
        ok.validate().unwrap();
    }

    #[test]
    fn identical_seeds_give_identical_traces() {
        let g = uniform_group(0.1);
        let cfg = small_cfg();
        let a = run_trial(&g, &cfg, &mut stream(9)).unwrap();
        let b = run_trial(&g, &cfg, &mut stream(9)).unwrap();
        assert_eq!(a, b);
    }
}
