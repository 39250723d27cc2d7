//! Several groups retrained in lock-step under one fairness policy.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fairness::{dp_tune, DEFAULT_PARITY_TOLERANCE};
use crate::retrain::{AnnotationMode, RetrainConfig, RoundRecord, TrialState};
use crate::rng::{stream, SimRng};
use crate::{Error, GroupSpec, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessMode {
    #[default]
    None,
    /// Re-tune both thresholds for demographic parity after every fit.
    DpEveryRound,
    /// First group annotates probabilistically, second group with hard labels.
    DisparateStrategies,
    /// Disparate strategies, reporting the round where unfairness bottoms out.
    EarlyStop,
}

impl FairnessMode {
    pub fn needs_two_groups(self) -> bool {
        self != FairnessMode::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTrace {
    pub group: alloc::string::String,
    pub records: Vec<RoundRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub trial: usize,
    pub seed: u64,
    pub groups: Vec<GroupTrace>,
    /// `|a_t^i − a_t^j|` per round when exactly two groups ran.
    pub unfairness: Option<Vec<f64>>,
}

/// `|a_i − a_j|`
pub fn dp_unfairness(a_i: f64, a_j: f64) -> f64 {
    libm::fabs(a_i - a_j)
}

fn tune(states: &mut [TrialState], tolerance: f64) -> Result<()> {
    let mut scores = Vec::with_capacity(2);
    for s in states.iter() {
        let set = s.training_set();
        let m = s.model();
        let sc: Vec<f64> = (0..set.len())
            .map(|k| m.score_of_margin(m.margin(set.feature(k))))
            .collect();
        scores.push(sc);
    }
    let fair = dp_tune(
        &scores[0],
        &states[0].training_set().labels,
        &scores[1],
        &states[1].training_set().labels,
        tolerance,
    )?;
    states[0].set_threshold(fair.theta_i, fair.unconstrained_i);
    states[1].set_threshold(fair.theta_j, fair.unconstrained_j);
    Ok(())
}

/// Runs one trial for every group. Each group gets its own copy of the
/// stream seeded by `seed`, so identical groups produce identical traces.
pub fn run_groups(
    groups: &[GroupSpec],
    cfg: &RetrainConfig,
    fairness: FairnessMode,
    tolerance: Option<f64>,
    trial: usize,
    seed: u64,
) -> Result<TrialTrace> {
    if groups.is_empty() {
        return Err(Error::config("at least one group is required"));
    }
    if fairness.needs_two_groups() && groups.len() != 2 {
        return Err(Error::config("this fairness mode needs exactly two groups"));
    }
    for g in groups {
        g.validate()?;
    }
    let tolerance = tolerance.unwrap_or(DEFAULT_PARITY_TOLERANCE);
    let mut rngs: Vec<SimRng> = groups.iter().map(|_| stream(seed)).collect();
    let mut states = Vec::with_capacity(groups.len());
    for (g, rng) in groups.iter().zip(rngs.iter_mut()) {
        states.push(TrialState::init(g, cfg, rng)?);
    }
    if matches!(
        fairness,
        FairnessMode::DisparateStrategies | FairnessMode::EarlyStop
    ) {
        states[0].set_annotation(AnnotationMode::Probabilistic);
        states[1].set_annotation(AnnotationMode::Hard);
    }
    let mut records: Vec<Vec<RoundRecord>> = groups
        .iter()
        .map(|_| Vec::with_capacity(cfg.rounds + 1))
        .collect();
    for t in 0..=cfg.rounds {
        if t > 0 {
            for ((s, g), rng) in states.iter_mut().zip(groups).zip(rngs.iter_mut()) {
                s.begin_round(g, cfg, rng)?;
            }
        }
        if fairness == FairnessMode::DpEveryRound {
            tune(&mut states, tolerance)?;
        }
        for (k, ((s, g), rng)) in states
            .iter_mut()
            .zip(groups)
            .zip(rngs.iter_mut())
            .enumerate()
        {
            records[k].push(s.finish_round(g, cfg, rng)?);
        }
    }
    let unfairness = (groups.len() == 2).then(|| {
        records[0]
            .iter()
            .zip(&records[1])
            .map(|(a, b)| dp_unfairness(a.a, b.a))
            .collect()
    });
    Ok(TrialTrace {
        trial,
        seed,
        groups: groups
            .iter()
            .zip(records)
            .map(|(g, r)| GroupTrace {
                group: g.id.clone(),
                records: r,
            })
            .collect(),
        unfairness,
    })
}
