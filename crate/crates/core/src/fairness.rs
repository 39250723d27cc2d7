//! Demographic-parity threshold tuning, early stopping and the
//! intervention flip check.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::logit;
use crate::retrain::RoundRecord;
use crate::{Error, Result};

/// Candidate thresholds per group.
pub const THRESHOLD_GRID: usize = 512;
pub const DEFAULT_PARITY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairThresholds {
    pub theta_i: f64,
    pub theta_j: f64,
    pub acceptance_i: f64,
    pub acceptance_j: f64,
    /// Sample-weighted accuracy of the pair.
    pub accuracy: f64,
    pub gap: f64,
    /// Per-group accuracy maximizers ignoring parity.
    pub unconstrained_i: f64,
    pub unconstrained_j: f64,
    pub unconstrained_acceptance_i: f64,
    pub unconstrained_acceptance_j: f64,
}

struct Candidates {
    thetas: Vec<f64>,
    accepted: Vec<usize>,
    correct: Vec<usize>,
    n: usize,
}

fn candidates(scores: &[f64], labels: &[u8]) -> Result<Candidates> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::EmptyData);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::config("scores must be finite"));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
    // positives at or after each sorted position
    let mut pos_suffix = alloc::vec![0usize; n + 1];
    for k in (0..n).rev() {
        pos_suffix[k] = pos_suffix[k + 1] + labels[order[k]] as usize;
    }
    let total_pos = pos_suffix[0];
    let mut thetas: Vec<f64> = (0..THRESHOLD_GRID)
        .map(|k| {
            let idx = libm::round(k as f64 / (THRESHOLD_GRID - 1) as f64 * (n - 1) as f64) as usize;
            sorted[idx]
        })
        .collect();
    thetas.dedup();
    let mut accepted = Vec::with_capacity(thetas.len());
    let mut correct = Vec::with_capacity(thetas.len());
    for &t in &thetas {
        let first = sorted.partition_point(|&s| s < t);
        let acc = n - first;
        let tp = pos_suffix[first];
        let tn = (n - acc) - (total_pos - tp);
        accepted.push(acc);
        correct.push(tp + tn);
    }
    Ok(Candidates {
        thetas,
        accepted,
        correct,
        n,
    })
}

impl Candidates {
    fn rate(&self, k: usize) -> f64 {
        self.accepted[k] as f64 / self.n as f64
    }

    // most correct, then smallest threshold
    fn best(&self) -> usize {
        let mut best = 0;
        for k in 1..self.thetas.len() {
            if self.correct[k] > self.correct[best] {
                best = k;
            }
        }
        best
    }
}

/// Picks the threshold pair with the highest pooled accuracy among pairs
/// whose acceptance rates differ by at most `tolerance`. Acceptance is
/// `score ≥ θ`. Ties go to the smaller gap, then the smaller `θ_i`.
pub fn dp_tune(
    scores_i: &[f64],
    labels_i: &[u8],
    scores_j: &[f64],
    labels_j: &[u8],
    tolerance: f64,
) -> Result<FairThresholds> {
    if !(tolerance > 0.0) {
        return Err(Error::config("parity tolerance must be positive"));
    }
    let ci = candidates(scores_i, labels_i)?;
    let cj = candidates(scores_j, labels_j)?;
    let mut best: Option<(usize, usize, usize, f64)> = None;
    let mut smallest_gap = f64::INFINITY;
    for a in 0..ci.thetas.len() {
        let ra = ci.rate(a);
        for b in 0..cj.thetas.len() {
            let gap = libm::fabs(ra - cj.rate(b));
            smallest_gap = smallest_gap.min(gap);
            if gap > tolerance {
                continue;
            }
            let correct = ci.correct[a] + cj.correct[b];
            let better = match best {
                None => true,
                Some((_, _, c, g)) => correct > c || (correct == c && gap < g),
            };
            if better {
                best = Some((a, b, correct, gap));
            }
        }
    }
    let (a, b, correct, gap) = best.ok_or(Error::Infeasible {
        tolerance,
        best_gap: smallest_gap,
    })?;
    let (ui, uj) = (ci.best(), cj.best());
    Ok(FairThresholds {
        theta_i: ci.thetas[a],
        theta_j: cj.thetas[b],
        acceptance_i: ci.rate(a),
        acceptance_j: cj.rate(b),
        accuracy: correct as f64 / (ci.n + cj.n) as f64,
        gap,
        unconstrained_i: ci.thetas[ui],
        unconstrained_j: cj.thetas[uj],
        unconstrained_acceptance_i: ci.rate(ui),
        unconstrained_acceptance_j: cj.rate(uj),
    })
}

/// First round attaining the minimum of `trace`, with that minimum.
pub fn early_stop_scan(trace: &[f64]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (t, &u) in trace.iter().enumerate() {
        if best.is_none_or(|(_, b)| u < b) {
            best = Some((t, u));
        }
    }
    best.ok_or(Error::EmptyTrace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipRound {
    pub round: usize,
    /// False when `j` was not disadvantaged through `round` or when
    /// `a_0^i ≤ a_t^j`.
    pub applicable: bool,
    /// `(logit θ_t^j − logit θ̃_t^j)·sqrt(a_0^i − a_t^j)`, in units of the
    /// linear score where the noise acts.
    pub bound: f64,
    /// Same product with raw thresholds.
    pub bound_theta: f64,
    /// `(θ_t^j − θ̃_t^j) / sqrt(a_0^i − a_t^j)`
    pub bound_division: f64,
    pub below_bound: bool,
    pub disadvantaged_next: bool,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub sigma: f64,
    pub with_fairness: bool,
    /// Reason the check was skipped entirely.
    pub skipped: Option<alloc::string::String>,
    pub rounds: Vec<FlipRound>,
    pub any_flip: bool,
    /// With fairness: no round below its bound flipped.
    pub guarantee_held: bool,
}

fn margin_threshold(theta: f64) -> f64 {
    logit(theta.clamp(1e-12, 1.0 - 1e-12))
}

/// Tracks whether the disadvantaged group `j` (second trace) overtakes
/// group `i` (first trace) one round later.
///
/// "Disadvantaged" compares acceptance under the unconstrained thresholds.
/// With fairness the check asserts the guarantee on every round where the
/// noise level is below the bound; without fairness flips are only
/// recorded.
pub fn intervention_flip_check(
    trace_i: &[RoundRecord],
    trace_j: &[RoundRecord],
    sigma: f64,
    with_fairness: bool,
) -> FlipReport {
    let mut report = FlipReport {
        sigma,
        with_fairness,
        skipped: None,
        rounds: Vec::new(),
        any_flip: false,
        guarantee_held: true,
    };
    let len = trace_i.len().min(trace_j.len());
    if len < 2 {
        report.skipped = Some("need at least two rounds".into());
        return report;
    }
    let disadvantaged = |t: usize| trace_j[t].a_unconstrained < trace_i[t].a_unconstrained;
    if !disadvantaged(0) {
        report.skipped = Some("group j is not disadvantaged at round 0".into());
        return report;
    }
    let a0_i = trace_i[0].a_unconstrained;
    let mut through = true;
    for t in 0..len - 1 {
        through &= disadvantaged(t);
        let rj = &trace_j[t];
        let room = a0_i - rj.a_unconstrained;
        let applicable = through && room > 0.0;
        let sq = if room > 0.0 {
            libm::sqrt(room)
        } else {
            f64::NAN
        };
        let bound = (margin_threshold(rj.theta_unconstrained) - margin_threshold(rj.theta)) * sq;
        let bound_theta = (rj.theta_unconstrained - rj.theta) * sq;
        let bound_division = (rj.theta_unconstrained - rj.theta) / sq;
        let next = disadvantaged(t + 1);
        let flipped = applicable && !next;
        let below_bound = applicable && sigma < bound;
        if flipped {
            report.any_flip = true;
        }
        if with_fairness && below_bound && flipped {
            report.guarantee_held = false;
        }
        report.rounds.push(FlipRound {
            round: t,
            applicable,
            bound,
            bound_theta,
            bound_division,
            below_bound,
            disadvantaged_next: next,
            flipped,
        });
    }
    report
}
