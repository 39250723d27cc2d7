//! Training-set recursions, the improvement integral and trace aggregation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::learner::{Boundary, LinearModel};
use crate::math::{dot, integrate, mean, std_err};
use crate::multigroup::TrialTrace;
use crate::population::{PopulationMode, PopulationSpec};
use crate::response::CostModel;
use crate::rng::{stream, SimRng};
use crate::{Error, Result};

/// Expected label mean of `S_t` given `q̄_{t-1}`, `a_{t-1}` and `q̄_0`
/// (`t ≥ 1`):
///
/// `[(tN + (t-1)K) q̄_{t-1} + N a_{t-1} + K q̄_0] / [(t+1)N + tK]`
pub fn qbar_recursion(
    qbar_prev: f64,
    a_prev: f64,
    qbar0: f64,
    t: usize,
    n: usize,
    k: usize,
) -> f64 {
    debug_assert!(t >= 1);
    let (t, n, k) = (t as f64, n as f64, k as f64);
    ((t * n + (t - 1.0) * k) * qbar_prev + n * a_prev + k * qbar0) / ((t + 1.0) * n + t * k)
}

/// [`qbar_recursion`] when human samples come from the post-response
/// population with qualification `q*_{t-1}`.
pub fn qbar_recursion_postbr(
    qbar_prev: f64,
    a_prev: f64,
    t: usize,
    n: usize,
    k: usize,
    qstar_prev: f64,
) -> f64 {
    qbar_recursion(qbar_prev, a_prev, qstar_prev, t, n, k)
}

const BOX_MASS: f64 = 1.0 - 1e-10;
const MC_SAMPLES: usize = 1_000_000;

/// Expected gain in `P(Y=1|x)` produced by noiseless best responses to
/// `model`, i.e. the integral of `p(x) [P(Y=1|z*(x)) − P(Y=1|x)]` over the
/// agents that are rejected but can reach the boundary at cost ≤ 1.
///
/// Uses nested adaptive quadrature for up to three features and a
/// fixed-seed Monte Carlo estimate with 10⁶ draws beyond that.
pub fn improvement_integral(
    spec: &PopulationSpec,
    model: &LinearModel,
    cost: &CostModel,
) -> Result<f64> {
    let PopulationMode::Marginal {
        marginals,
        label_fn,
    } = &spec.population
    else {
        return Err(Error::Unsupported(
            "improvement integral needs marginal-mode populations".into(),
        ));
    };
    let d = spec.dims;
    if model.dims() != d || cost.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            got: model.dims(),
        });
    }
    let Boundary::At(tau) = model.boundary() else {
        return Ok(0.0);
    };
    let w = &model.weights;
    if w.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    if d > 3 {
        return improvement_monte_carlo(spec, model, cost, MC_SAMPLES, &mut stream(0x1A7E_6A11));
    }
    let dir = cost.solve(w);
    let denom = dot(w, &dir);
    let reach = libm::sqrt(denom);
    let pivot = (0..d)
        .max_by(|&a, &b| libm::fabs(w[a]).total_cmp(&libm::fabs(w[b])))
        .unwrap_or(0);
    let outer: Vec<usize> = (0..d).filter(|&k| k != pivot).collect();
    let bounds = spec.central_box(BOX_MASS);

    let gain = |x: &[f64]| -> f64 {
        let gap = tau - dot(w, x) - model.bias;
        let z: Vec<f64> = x
            .iter()
            .zip(&dir)
            .map(|(xi, vi)| xi + vi * gap / denom)
            .collect();
        label_fn.prob(&z) - label_fn.prob(x)
    };
    let inner = |x: &mut [f64]| -> f64 {
        let rest: f64 = outer.iter().map(|&k| w[k] * x[k]).sum::<f64>() + model.bias;
        let wp = w[pivot];
        let (mut lo, mut hi) = ((tau - reach - rest) / wp, (tau - rest) / wp);
        if lo > hi {
            core::mem::swap(&mut lo, &mut hi);
        }
        let (blo, bhi) = bounds[pivot];
        let (lo, hi) = (lo.max(blo), hi.min(bhi));
        if lo >= hi {
            return 0.0;
        }
        let mut buf = x.to_vec();
        integrate(
            |v| {
                buf[pivot] = v;
                marginals[pivot].pdf(v) * gain(&buf)
            },
            lo,
            hi,
            1e-8,
            1e-13,
            200,
        )
    };

    let mut x = vec![0.0; d];
    let value = match outer.len() {
        0 => inner(&mut x),
        1 => {
            let k0 = outer[0];
            let (a, b) = bounds[k0];
            integrate(
                |v| {
                    let mut x = vec![0.0; d];
                    x[k0] = v;
                    marginals[k0].pdf(v) * inner(&mut x)
                },
                a,
                b,
                1e-7,
                1e-12,
                200,
            )
        }
        _ => {
            let (k0, k1) = (outer[0], outer[1]);
            let (a0, b0) = bounds[k0];
            let (a1, b1) = bounds[k1];
            integrate(
                |u| {
                    marginals[k0].pdf(u)
                        * integrate(
                            |v| {
                                let mut x = vec![0.0; d];
                                x[k0] = u;
                                x[k1] = v;
                                marginals[k1].pdf(v) * inner(&mut x)
                            },
                            a1,
                            b1,
                            1e-6,
                            1e-11,
                            100,
                        )
                },
                a0,
                b0,
                1e-6,
                1e-10,
                100,
            )
        }
    };
    Ok(value)
}

/// Monte Carlo estimate of [`improvement_integral`] from `n` draws of `P_X`.
pub fn improvement_monte_carlo(
    spec: &PopulationSpec,
    model: &LinearModel,
    cost: &CostModel,
    n: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let Boundary::At(tau) = model.boundary() else {
        return Ok(0.0);
    };
    let d = spec.dims;
    let w = &model.weights;
    let dir = cost.solve(w);
    let denom = dot(w, &dir);
    if !(denom > 0.0) {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut z = vec![0.0; d];
    let xs = spec.sample_features(n, rng);
    for x in xs.chunks_exact(d) {
        let gap = tau - dot(w, x) - model.bias;
        if gap <= 0.0 || gap * gap > denom {
            continue;
        }
        for k in 0..d {
            z[k] = x[k] + dir[k] * gap / denom;
        }
        total += spec.label_prob(&z) - spec.label_prob(x);
    }
    Ok(total / n as f64)
}

/// Least-squares slope of `ys` against `0, 1, …` with its standard error.
pub fn linear_slope(ys: &[f64]) -> (f64, f64) {
    let n = ys.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let xbar = (nf - 1.0) / 2.0;
    let ybar = mean(ys);
    let sxx: f64 = (0..n).map(|i| (i as f64 - xbar) * (i as f64 - xbar)).sum();
    let sxy: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    if n < 3 {
        return (slope, 0.0);
    }
    let rss: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let e = y - ybar - slope * (i as f64 - xbar);
            e * e
        })
        .sum();
    (slope, libm::sqrt(rss / (nf - 2.0) / sxx))
}

/// Mean, standard error and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            stderr: std_err(xs),
            min: xs.iter().cloned().fold(f64::INFINITY, f64::min),
            max: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// One (trial, round, group) line of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub trial: usize,
    pub round: usize,
    pub group: String,
    pub a: f64,
    pub q: f64,
    pub delta: f64,
    pub qbar: f64,
    pub theta: f64,
    pub unfairness: Option<f64>,
}

/// Flattens a trial into rows ordered by round, then group.
pub fn trace_rows(trace: &TrialTrace) -> Vec<TraceRow> {
    let rounds = trace.groups.first().map_or(0, |g| g.records.len());
    let mut rows = Vec::with_capacity(rounds * trace.groups.len());
    for t in 0..rounds {
        for g in &trace.groups {
            let r = &g.records[t];
            rows.push(TraceRow {
                trial: trace.trial,
                round: r.round,
                group: g.group.clone(),
                a: r.a,
                q: r.q,
                delta: r.delta,
                qbar: r.qbar,
                theta: r.theta,
                unfairness: trace.unfairness.as_ref().map(|u| u[t]),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub round: usize,
    pub group: String,
    pub n_trials: usize,
    pub a: Stat,
    pub q: Stat,
    pub delta: Stat,
    pub qbar: Stat,
    pub theta: Stat,
    pub unfairness: Option<Stat>,
}

/// Mean and standard error per (round, group), ordered by round and then
/// by the order groups first appear.
pub fn aggregate(rows: &[TraceRow]) -> Result<Vec<AggregateRow>> {
    if rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut groups: Vec<&str> = Vec::new();
    let mut max_round = 0;
    for r in rows {
        if !groups.contains(&r.group.as_str()) {
            groups.push(&r.group);
        }
        max_round = max_round.max(r.round);
    }
    let mut out = Vec::new();
    for t in 0..=max_round {
        for g in &groups {
            let sel: Vec<&TraceRow> = rows
                .iter()
                .filter(|r| r.round == t && r.group == *g)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let col =
                |f: fn(&TraceRow) -> f64| Stat::of(&sel.iter().map(|r| f(r)).collect::<Vec<_>>());
            let unf: Vec<f64> = sel.iter().filter_map(|r| r.unfairness).collect();
            out.push(AggregateRow {
                round: t,
                group: String::from(*g),
                n_trials: sel.len(),
                a: col(|r| r.a),
                q: col(|r| r.q),
                delta: col(|r| r.delta),
                qbar: col(|r| r.qbar),
                theta: col(|r| r.theta),
                unfairness: (!unf.is_empty()).then(|| Stat::of(&unf)),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::Link;
    use crate::population::Distribution1D;
    use crate::LabelFn;

    #[test]
    fn recursion_hand_value() {
        let v = qbar_recursion(0.5, 0.6, 0.5, 2, 2000, 100);
        assert!((v - 3300.0 / 6200.0).abs() < 1e-12);
        assert_eq!(qbar_recursion(0.37, 0.37, 0.37, 1, 2000, 100), 0.37);
        assert!(
            qbar_recursion_postbr(0.5, 0.6, 2, 2000, 100, 0.7)
                > qbar_recursion(0.5, 0.6, 0.5, 2, 2000, 100)
        );
        assert_eq!(
            qbar_recursion_postbr(0.5, 0.6, 2, 2000, 100, 0.5),
            qbar_recursion(0.5, 0.6, 0.5, 2, 2000, 100)
        );
    }

    fn uniform_linear() -> PopulationSpec {
        PopulationSpec::marginal(
            vec![Distribution1D::Uniform { lo: 0.0, hi: 1.0 }; 2],
            LabelFn::Linear {
                coeffs: vec![0.5, 0.5],
                intercept: 0.0,
            },
        )
    }

    #[test]
    fn improvement_reference_value() {
        let m = LinearModel::new(vec![1.0, 1.0], 0.0, 1.0).with_link(Link::Identity);
        let cost = CostModel::scaled_identity(2, 5.0).unwrap();
        let v = improvement_integral(&uniform_linear(), &m, &cost).unwrap();
        let g = libm::sqrt(0.4);
        let exact = 0.5 * (g * g / 2.0 - g * g * g / 3.0);
        assert!((v - exact).abs() < 1e-7, "{v} vs {exact}");
        assert!((v - 0.0578).abs() < 5e-4);
    }

    #[test]
    fn improvement_shrinks_with_cost_and_vanishes_when_all_accepted() {
        let spec = uniform_linear();
        let m = LinearModel::new(vec![1.0, 1.0], 0.0, 1.0).with_link(Link::Identity);
        let c1 = CostModel::scaled_identity(2, 5.0).unwrap();
        let c4 = CostModel::scaled_identity(2, 20.0).unwrap();
        assert!(
            improvement_integral(&spec, &m, &c4).unwrap()
                < improvement_integral(&spec, &m, &c1).unwrap()
        );
        let all = LinearModel::new(vec![1.0, 1.0], 5.0, 0.5);
        assert_eq!(improvement_integral(&spec, &all, &c1).unwrap(), 0.0);
    }

    #[test]
    fn slope_of_line() {
        let ys: Vec<f64> = (0..10).map(|i| 2.0 + 0.5 * i as f64).collect();
        let (s, se) = linear_slope(&ys);
        assert!((s - 0.5).abs() < 1e-12 && se < 1e-9);
    }

    #[test]
    fn aggregate_single_trial_has_zero_stderr() {
        let rows = vec![TraceRow {
            trial: 0,
            round: 0,
            group: "g".into(),
            a: 0.4,
            q: 0.5,
            delta: 0.1,
            qbar: 0.5,
            theta: 0.5,
            unfairness: None,
        }];
        let agg = aggregate(&rows).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].a.stderr, 0.0);
        assert_eq!(aggregate(&[]), Err(Error::EmptyTrace));
    }
}
