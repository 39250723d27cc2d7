//! Agent best response under quadratic feature-change costs.
//!
//! An agent at `x` facing a linear threshold classifier maximizes
//! `f(z) - (z - x)ᵀ B (z - x)`. A rejected agent either stays put or moves to
//! the cheapest accepted point, which lies on the decision boundary
//! `w·z + b = τ`:
//!
//! ```text
//! z* = x + B⁻¹w (τ - w·x - b) / (wᵀB⁻¹w)      cost = (τ - w·x - b)² / (wᵀB⁻¹w)
//! ```
//!
//! It moves when that cost is at most the unit gain of acceptance.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::learner::{Boundary, LinearModel};
use crate::linalg::{Cholesky, SquareMatrix};
use crate::math::dot;
use crate::population::{bernoulli, PopulationSpec};
use crate::rng::SimRng;
use crate::{Error, Result};

/// Slack allowed when checking that a paid cost does not exceed the gain.
pub const COST_TOLERANCE: f64 = 1e-9;

/// Quadratic cost `c(x, z) = (z - x)ᵀ B (z - x)` with `B` symmetric positive
/// definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SquareMatrix", into = "SquareMatrix")]
pub struct CostModel {
    matrix: SquareMatrix,
    chol: Cholesky,
}

impl CostModel {
    pub fn new(matrix: SquareMatrix) -> Result<Self> {
        if matrix.dim() == 0 {
            return Err(Error::config("cost matrix is empty"));
        }
        if !matrix.is_symmetric() {
            return Err(Error::config("cost matrix must be symmetric"));
        }
        let chol = matrix
            .cholesky()
            .ok_or_else(|| Error::config("cost matrix must be positive definite"))?;
        Ok(Self { matrix, chol })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(SquareMatrix::identity(dim)).expect("identity is positive definite")
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Result<Self> {
        Self::new(SquareMatrix::scaled_identity(dim, s))
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(SquareMatrix::diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn cost(&self, x: &[f64], z: &[f64]) -> f64 {
        let d: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
        self.matrix.quad_form(&d)
    }

    /// `B⁻¹ v`
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        self.chol.solve(v)
    }

    /// Per-axis half-widths of the box containing every move of cost ≤ 1.
    pub fn unit_cost_box(&self) -> Vec<f64> {
        self.chol
            .inverse_diagonal()
            .into_iter()
            .map(libm::sqrt)
            .collect()
    }
}

impl TryFrom<SquareMatrix> for CostModel {
    type Error = Error;
    fn try_from(m: SquareMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<CostModel> for SquareMatrix {
    fn from(c: CostModel) -> Self {
        c.matrix
    }
}

/// What one agent did in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseOutcome {
    pub moved: bool,
    pub new_feature: Vec<f64>,
    pub cost_paid: f64,
    pub new_label: u8,
    /// Boundary (on the linear score `w·x + b`) the agent believed in.
    pub perceived_threshold: f64,
}

/// Cheapest move to the half-space `w·z + b ≥ τ`, returned as `(cost, z*)`.
///
/// Points already inside cost nothing. The returned point is nudged, if
/// rounding requires it, so that it satisfies the inequality exactly.
pub fn min_cost_to_boundary(
    x: &[f64],
    weights: &[f64],
    bias: f64,
    tau: f64,
    cost: &CostModel,
) -> Result<(f64, Vec<f64>)> {
    check_dims(x.len(), weights.len(), cost)?;
    let gap = tau - dot(weights, x) - bias;
    if gap <= 0.0 {
        return Ok((0.0, x.to_vec()));
    }
    if weights.iter().all(|w| *w == 0.0) {
        return Err(Error::DegenerateModel);
    }
    let dir = cost.solve(weights);
    let denom = dot(weights, &dir);
    Ok(project(x, weights, bias, tau, &dir, denom, gap))
}

fn project(
    x: &[f64],
    w: &[f64],
    b: f64,
    tau: f64,
    dir: &[f64],
    denom: f64,
    gap: f64,
) -> (f64, Vec<f64>) {
    let step = gap / denom;
    let mut z: Vec<f64> = x.iter().zip(dir).map(|(xi, vi)| xi + vi * step).collect();
    let mut nudge = f64::EPSILON * (1.0 + libm::fabs(tau));
    while dot(w, &z) + b < tau {
        for (zi, vi) in z.iter_mut().zip(dir) {
            *zi += vi * nudge / denom;
        }
        nudge *= 2.0;
    }
    (gap * gap / denom, z)
}

fn check_dims(x: usize, w: usize, cost: &CostModel) -> Result<()> {
    if w != x {
        return Err(Error::Dimension {
            expected: w,
            got: x,
        });
    }
    if cost.dim() != x {
        return Err(Error::Dimension {
            expected: cost.dim(),
            got: x,
        });
    }
    Ok(())
}

/// Cheapest way for the agent at `x` to be accepted by `model`.
///
/// Returns `(0, x)` for accepted agents and an infinite cost when the model
/// rejects every point.
pub fn min_cost_to_acceptance(
    x: &[f64],
    model: &LinearModel,
    cost: &CostModel,
) -> Result<(f64, Vec<f64>)> {
    check_dims(x.len(), model.weights.len(), cost)?;
    match model.boundary() {
        Boundary::AcceptAll => Ok((0.0, x.to_vec())),
        Boundary::RejectAll => {
            if model.weights.iter().all(|w| *w == 0.0) {
                Err(Error::DegenerateModel)
            } else {
                Ok((f64::INFINITY, x.to_vec()))
            }
        }
        Boundary::At(tau) => min_cost_to_boundary(x, &model.weights, model.bias, tau, cost),
    }
}

/// Per-round cache of `B⁻¹w` and `wᵀB⁻¹w` for one deployed model.
#[derive(Debug, Clone)]
pub struct Responder<'a> {
    model: &'a LinearModel,
    boundary: Boundary,
    dir: Vec<f64>,
    denom: f64,
}

impl<'a> Responder<'a> {
    pub fn new(model: &'a LinearModel, cost: &CostModel) -> Result<Self> {
        if cost.dim() != model.weights.len() {
            return Err(Error::Dimension {
                expected: model.weights.len(),
                got: cost.dim(),
            });
        }
        let dir = cost.solve(&model.weights);
        let denom = dot(&model.weights, &dir);
        Ok(Self {
            model,
            boundary: model.boundary(),
            dir,
            denom,
        })
    }

    /// Noisy best response: the agent sees the boundary shifted by
    /// `ε ~ N(0, σ²)` (no draw when `σ = 0`), moves if that perceived
    /// boundary rejects it and costs at most 1 to reach, and then draws a
    /// fresh label from `P(Y=1 | z*)`.
    pub fn respond(
        &self,
        x: &[f64],
        y: u8,
        noise_sigma: f64,
        spec: &PopulationSpec,
        rng: &mut SimRng,
    ) -> Result<ResponseOutcome> {
        let stay = |perceived: f64| ResponseOutcome {
            moved: false,
            new_feature: x.to_vec(),
            cost_paid: 0.0,
            new_label: y,
            perceived_threshold: perceived,
        };
        let tau = match self.boundary {
            Boundary::AcceptAll => return Ok(stay(f64::NEG_INFINITY)),
            Boundary::RejectAll => return Ok(stay(f64::INFINITY)),
            Boundary::At(t) => t,
        };
        let eps = if noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            noise_sigma * z
        } else {
            0.0
        };
        let perceived = tau + eps;
        let margin = self.model.margin(x);
        if margin >= perceived {
            return Ok(stay(perceived));
        }
        if !(self.denom > 0.0) {
            return Err(Error::DegenerateModel);
        }
        let gap = perceived - margin;
        let c = gap * gap / self.denom;
        if c > 1.0 {
            return Ok(stay(perceived));
        }
        let (c, z) = project(
            x,
            &self.model.weights,
            self.model.bias,
            perceived,
            &self.dir,
            self.denom,
            gap,
        );
        let new_label = bernoulli(rng, spec.label_prob(&z));
        Ok(ResponseOutcome {
            moved: true,
            new_feature: z,
            cost_paid: c,
            new_label,
            perceived_threshold: perceived,
        })
    }
}

/// One agent's (possibly noisy) best response to `model`.
pub fn best_respond(
    x: &[f64],
    y: u8,
    model: &LinearModel,
    cost: &CostModel,
    noise_sigma: f64,
    spec: &PopulationSpec,
    rng: &mut SimRng,
) -> Result<ResponseOutcome> {
    if !(noise_sigma >= 0.0) {
        return Err(Error::config("noise_sigma must be nonnegative"));
    }
    check_dims(x.len(), model.weights.len(), cost)?;
    Responder::new(model, cost)?.respond(x, y, noise_sigma, spec, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridDiagnostic {
    /// No grid point inside the search box is accepted by the model.
    NoFeasiblePoint,
}

/// Result of the grid-search oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResponse {
    pub moved: bool,
    pub new_feature: Vec<f64>,
    /// Cost of the cheapest accepted grid point (infinite if none).
    pub best_cost: f64,
    pub points_searched: u64,
    pub diagnostic: Option<GridDiagnostic>,
}

/// Exhaustive grid search for the utility-maximizing move; a test oracle for
/// the closed form.
///
/// A cheapest accepted point always sits on the boundary (the cost grows
/// along any ray from `x`), so the grid spans the boundary hyperplane: every
/// coordinate but the one with the largest `|wₖ|` steps over `xᵢ ± h`, and
/// the remaining coordinate is solved from the plane equation. The step is
/// `resolution` shrunk just enough that neighbouring grid points differ by at
/// most `resolution` in the solved coordinate too. `h` is `halfwidth`,
/// capped at the axis extent of the unit-cost ellipsoid (points outside it
/// cost more than 1).
///
/// Each candidate is then checked against the model itself. Ties go to the
/// lowest cost, then the lexicographically smallest grid index. The agent
/// moves when the best cost is at most 1.
pub fn brute_force_best_respond(
    x: &[f64],
    model: &LinearModel,
    cost: &CostModel,
    halfwidth: f64,
    resolution: f64,
) -> Result<GridResponse> {
    check_dims(x.len(), model.weights.len(), cost)?;
    if !(resolution > 0.0) || !(halfwidth >= 0.0) {
        return Err(Error::config(
            "grid needs resolution > 0 and halfwidth >= 0",
        ));
    }
    let stay = |best_cost: f64, points: u64, diagnostic| GridResponse {
        moved: false,
        new_feature: x.to_vec(),
        best_cost,
        points_searched: points,
        diagnostic,
    };
    if model.accepts(x) {
        return Ok(stay(0.0, 0, None));
    }
    let tau = match model.boundary() {
        Boundary::At(t) if model.weights.iter().any(|w| *w != 0.0) => t,
        _ => {
            return Ok(stay(
                f64::INFINITY,
                0,
                Some(GridDiagnostic::NoFeasiblePoint),
            ))
        }
    };
    let d = x.len();
    let w = &model.weights;
    let pivot = (0..d)
        .max_by(|&i, &j| libm::fabs(w[i]).partial_cmp(&libm::fabs(w[j])).unwrap())
        .unwrap();
    let free: Vec<usize> = (0..d).filter(|&i| i != pivot).collect();
    let spread: f64 = free.iter().map(|&i| libm::fabs(w[i])).sum();
    let step = if spread > libm::fabs(w[pivot]) {
        resolution * libm::fabs(w[pivot]) / spread
    } else {
        resolution
    };
    let reach = cost.unit_cost_box();
    let steps: Vec<i64> = free
        .iter()
        .map(|&i| libm::ceil(halfwidth.min(reach[i] + step) / step) as i64)
        .collect();
    let mut idx: Vec<i64> = steps.iter().map(|s| -s).collect();
    let mut z = x.to_vec();
    let mut diff = vec![0.0; d];
    let b = cost.matrix();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut searched = 0u64;
    loop {
        for (k, &i) in free.iter().enumerate() {
            z[i] = x[i] + idx[k] as f64 * step;
        }
        let rest: f64 = free.iter().map(|&i| w[i] * z[i]).sum();
        z[pivot] = (tau - model.bias - rest) / w[pivot];
        let mut bump = f64::EPSILON * (1.0 + libm::fabs(z[pivot]));
        while model.margin(&z) < tau {
            z[pivot] += libm::copysign(bump, w[pivot]);
            bump *= 2.0;
        }
        searched += 1;
        for i in 0..d {
            diff[i] = z[i] - x[i];
        }
        let c: f64 = (0..d)
            .map(|i| diff[i] * (0..d).map(|j| b.get(i, j) * diff[j]).sum::<f64>())
            .sum();
        if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
            best = Some((c, z.clone()));
        }
        // odometer over the free coordinates, last one fastest
        let mut k = free.len();
        loop {
            if k == 0 {
                let (c, z) = best.expect("at least one grid point");
                return Ok(if c <= 1.0 {
                    GridResponse {
                        moved: true,
                        new_feature: z,
                        best_cost: c,
                        points_searched: searched,
                        diagnostic: None,
                    }
                } else {
                    stay(c, searched, None)
                });
            }
            k -= 1;
            if idx[k] < steps[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = -steps[k];
        }
    }
}
