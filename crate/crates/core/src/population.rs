//! Agent populations: the fixed prior-best-response joint distribution of
//! features and labels, and the biased human annotator.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::math::{self, beta_cdf, beta_pdf, bisect, clamp01, normal_cdf, normal_pdf, sigmoid};
use crate::response::CostModel;
use crate::rng::SimRng;
use crate::{Error, Result};

/// Interior margin used when a bounded density is evaluated at its edge.
const EDGE: f64 = 1e-9;

/// A univariate distribution for one feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution1D {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        stddev: f64,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// Gaussian-kernel density estimate over `points`.
    Kde {
        points: Vec<f64>,
        bandwidth: f64,
    },
}

impl Distribution1D {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Self::Gaussian { mean, stddev } => {
                mean.is_finite() && stddev.is_finite() && *stddev > 0.0
            }
            Self::Beta { alpha, beta } => {
                alpha.is_finite() && beta.is_finite() && *alpha > 0.0 && *beta > 0.0
            }
            Self::Kde { points, bandwidth } => {
                points.len() >= 2
                    && points.iter().all(|p| p.is_finite())
                    && bandwidth.is_finite()
                    && *bandwidth > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid distribution parameters: {self:?}"
            )))
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Gaussian { mean, stddev } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + stddev * z
            }
            Self::Beta { alpha, beta } => rand_distr::Beta::new(*alpha, *beta)
                .expect("validated beta parameters")
                .sample(rng),
            Self::Kde { points, bandwidth } => {
                let i = rng.random_range(0..points.len());
                let z: f64 = StandardNormal.sample(rng);
                points[i] + bandwidth * z
            }
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Gaussian { mean, stddev } => normal_pdf(x, *mean, *stddev),
            Self::Beta { alpha, beta } => beta_pdf(x, *alpha, *beta),
            Self::Kde { points, bandwidth } => {
                points
                    .iter()
                    .map(|p| normal_pdf(x, *p, *bandwidth))
                    .sum::<f64>()
                    / points.len() as f64
            }
        }
    }

    /// Density evaluated at `x` pulled inside the support, so that bounded
    /// kinds never return zero or infinity.
    pub fn pdf_inside(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => self.pdf(x.clamp(*lo, *hi)),
            Self::Beta { .. } => self.pdf(x.clamp(EDGE, 1.0 - EDGE)),
            _ => self.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Gaussian { mean, stddev } => normal_cdf(x, *mean, *stddev),
            Self::Beta { alpha, beta } => beta_cdf(x, *alpha, *beta),
            Self::Kde { points, bandwidth } => {
                points
                    .iter()
                    .map(|p| normal_cdf(x, *p, *bandwidth))
                    .sum::<f64>()
                    / points.len() as f64
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            Self::Uniform { lo, hi } => lo + (hi - lo) * p,
            Self::Gaussian { mean, stddev } => mean + stddev * math::std_normal_quantile(p),
            Self::Beta { alpha, beta } => bisect(0.0, 1.0, p, |x| beta_cdf(x, *alpha, *beta)),
            Self::Kde { points, bandwidth } => {
                let lo = points.iter().cloned().fold(f64::INFINITY, f64::min) - 40.0 * bandwidth;
                let hi =
                    points.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 40.0 * bandwidth;
                bisect(lo, hi, p, |x| self.cdf(x))
            }
        }
    }

    /// Interval holding the central `mass` of the distribution.
    pub fn central_interval(&self, mass: f64) -> (f64, f64) {
        let tail = 0.5 * (1.0 - mass);
        (self.quantile(tail), self.quantile(1.0 - tail))
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Gaussian { mean, .. } => *mean,
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::Kde { points, .. } => math::mean(points),
        }
    }
}

/// `P(Y = 1 | x)` for marginal-mode populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelFn {
    /// `clamp(coeffs · x + intercept, 0, 1)`
    Linear { coeffs: Vec<f64>, intercept: f64 },
    /// `1 / (1 + exp(-(coeffs · x + intercept)))`
    Logistic { coeffs: Vec<f64>, intercept: f64 },
}

impl LabelFn {
    pub fn coeffs(&self) -> &[f64] {
        match self {
            Self::Linear { coeffs, .. } | Self::Logistic { coeffs, .. } => coeffs,
        }
    }

    pub fn intercept(&self) -> f64 {
        match self {
            Self::Linear { intercept, .. } | Self::Logistic { intercept, .. } => *intercept,
        }
    }

    #[inline]
    pub fn prob(&self, x: &[f64]) -> f64 {
        match self {
            Self::Linear { coeffs, intercept } => clamp01(math::dot(coeffs, x) + intercept),
            Self::Logistic { coeffs, intercept } => sigmoid(math::dot(coeffs, x) + intercept),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PopulationMode {
    /// Independent feature marginals plus an explicit labeling function.
    Marginal {
        marginals: Vec<Distribution1D>,
        label_fn: LabelFn,
    },
    /// Per-label feature distributions (independent given the label) and a
    /// base rate; the labeling function follows from Bayes' rule.
    Conditional {
        positive: Vec<Distribution1D>,
        negative: Vec<Distribution1D>,
        base_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub dims: usize,
    pub population: PopulationMode,
}

/// A batch of agents stored row-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Agents {
    pub dims: usize,
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

impl Agents {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    pub fn label_mean(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }
}

impl PopulationSpec {
    pub fn marginal(marginals: Vec<Distribution1D>, label_fn: LabelFn) -> Self {
        Self {
            dims: marginals.len(),
            population: PopulationMode::Marginal {
                marginals,
                label_fn,
            },
        }
    }

    pub fn conditional(
        positive: Vec<Distribution1D>,
        negative: Vec<Distribution1D>,
        base_rate: f64,
    ) -> Self {
        Self {
            dims: positive.len(),
            population: PopulationMode::Conditional {
                positive,
                negative,
                base_rate,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::config("population needs at least one dimension"));
        }
        let check_len = |what: &str, n: usize| {
            if n == self.dims {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{what} has {n} entries but dims = {}",
                    self.dims
                )))
            }
        };
        match &self.population {
            PopulationMode::Marginal {
                marginals,
                label_fn,
            } => {
                check_len("marginals", marginals.len())?;
                check_len("label_fn coefficients", label_fn.coeffs().len())?;
                if !label_fn.intercept().is_finite()
                    || label_fn.coeffs().iter().any(|c| !c.is_finite())
                {
                    return Err(Error::config("label_fn parameters must be finite"));
                }
                marginals.iter().try_for_each(Distribution1D::validate)?;
                let q0 = self.base_rate();
                if !(q0 > 0.0 && q0 < 1.0) {
                    return Err(Error::config(format!(
                        "derived q0 = {q0} is outside (0, 1)"
                    )));
                }
            }
            PopulationMode::Conditional {
                positive,
                negative,
                base_rate,
            } => {
                check_len("positive conditionals", positive.len())?;
                check_len("negative conditionals", negative.len())?;
                positive
                    .iter()
                    .chain(negative)
                    .try_for_each(Distribution1D::validate)?;
                if !(*base_rate > 0.0 && *base_rate < 1.0) {
                    return Err(Error::config(format!(
                        "base rate {base_rate} is outside (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `P(Y = 1 | x)`. In conditional mode, bounded densities are evaluated
    /// at the nearest in-support point when `x` leaves their support.
    #[inline]
    pub fn label_prob(&self, x: &[f64]) -> f64 {
        match &self.population {
            PopulationMode::Marginal { label_fn, .. } => label_fn.prob(x),
            PopulationMode::Conditional {
                positive,
                negative,
                base_rate,
            } => {
                let mut log_odds = libm::log(*base_rate) - libm::log1p(-*base_rate);
                for (k, xk) in x.iter().enumerate() {
                    log_odds += libm::log(positive[k].pdf_inside(*xk))
                        - libm::log(negative[k].pdf_inside(*xk));
                }
                if log_odds.is_nan() {
                    *base_rate
                } else {
                    sigmoid(log_odds)
                }
            }
        }
    }

    /// `q0 = E[P(Y = 1 | X)]`. Exact in conditional mode; a fixed-seed Monte
    /// Carlo estimate (2·10⁵ draws) in marginal mode.
    pub fn base_rate(&self) -> f64 {
        match &self.population {
            PopulationMode::Conditional { base_rate, .. } => *base_rate,
            PopulationMode::Marginal {
                marginals,
                label_fn,
            } => {
                let mut rng = crate::rng::stream(0x5EED_0F0A_5E);
                let n = 200_000;
                let mut x = alloc::vec![0.0; self.dims];
                let mut acc = 0.0;
                for _ in 0..n {
                    for (k, m) in marginals.iter().enumerate() {
                        x[k] = m.sample(&mut rng);
                    }
                    acc += label_fn.prob(&x);
                }
                acc / n as f64
            }
        }
    }

    /// Draws `n` feature vectors from `P_X`.
    pub fn sample_features(&self, n: usize, rng: &mut SimRng) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * self.dims);
        match &self.population {
            PopulationMode::Marginal { marginals, .. } => {
                for _ in 0..n {
                    out.extend(marginals.iter().map(|m| m.sample(rng)));
                }
            }
            PopulationMode::Conditional {
                positive,
                negative,
                base_rate,
            } => {
                for _ in 0..n {
                    let dists = if rng.random::<f64>() < *base_rate {
                        positive
                    } else {
                        negative
                    };
                    out.extend(dists.iter().map(|m| m.sample(rng)));
                }
            }
        }
        out
    }

    /// Per-dimension interval with the central `mass` of the feature marginal.
    pub fn central_box(&self, mass: f64) -> Vec<(f64, f64)> {
        match &self.population {
            PopulationMode::Marginal { marginals, .. } => {
                marginals.iter().map(|m| m.central_interval(mass)).collect()
            }
            PopulationMode::Conditional {
                positive, negative, ..
            } => positive
                .iter()
                .zip(negative)
                .map(|(p, q)| {
                    let (a, b) = p.central_interval(mass);
                    let (c, d) = q.central_interval(mass);
                    (a.min(c), b.max(d))
                })
                .collect(),
        }
    }
}

/// Draws `n` agents: all features first, then one uniform per label.
///
/// Conditional-mode populations draw each label before its features.
pub fn sample_agents(spec: &PopulationSpec, n: usize, rng: &mut SimRng) -> Result<Agents> {
    if n == 0 {
        return Err(Error::config("sample size must be at least 1"));
    }
    spec.validate_shape()?;
    let dims = spec.dims;
    match &spec.population {
        PopulationMode::Marginal { .. } => {
            let features = spec.sample_features(n, rng);
            let labels = (0..n)
                .map(|i| bernoulli(rng, spec.label_prob(&features[i * dims..(i + 1) * dims])))
                .collect();
            Ok(Agents {
                dims,
                features,
                labels,
            })
        }
        PopulationMode::Conditional {
            positive,
            negative,
            base_rate,
        } => {
            let mut features = Vec::with_capacity(n * dims);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let y = bernoulli(rng, *base_rate);
                let dists = if y == 1 { positive } else { negative };
                features.extend(dists.iter().map(|m| m.sample(rng)));
                labels.push(y);
            }
            Ok(Agents {
                dims,
                features,
                labels,
            })
        }
    }
}

impl PopulationSpec {
    // Cheap structural check for hot paths; full validation (including the
    // Monte Carlo q0) happens once at configuration time.
    fn validate_shape(&self) -> Result<()> {
        let n = match &self.population {
            PopulationMode::Marginal {
                marginals,
                label_fn,
            } => {
                if label_fn.coeffs().len() != self.dims {
                    return Err(Error::Dimension {
                        expected: self.dims,
                        got: label_fn.coeffs().len(),
                    });
                }
                marginals.len()
            }
            PopulationMode::Conditional {
                positive, negative, ..
            } => {
                if negative.len() != positive.len() {
                    return Err(Error::config("conditional distributions differ in length"));
                }
                positive.len()
            }
        };
        if n != self.dims || n == 0 {
            return Err(Error::Dimension {
                expected: self.dims,
                got: n,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn bernoulli(rng: &mut SimRng, p: f64) -> u8 {
    (rng.random::<f64>() < p) as u8
}

/// A social group: its population, the annotator's systematic bias and the
/// agents' feature-change cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub id: String,
    pub population: PopulationSpec,
    /// Additive shift `μ` applied to `P(Y=1|x)` by human annotators.
    #[serde(default)]
    pub bias: f64,
    pub cost: CostModel,
    /// Feature indices the classifier may use; all features when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classifier_features: Option<Vec<usize>>,
}

impl GroupSpec {
    pub fn new(
        id: impl Into<String>,
        population: PopulationSpec,
        bias: f64,
        cost: CostModel,
    ) -> Self {
        Self {
            id: id.into(),
            population,
            bias,
            cost,
            classifier_features: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        if !(self.bias > -1.0 && self.bias < 1.0) {
            return Err(Error::config(format!(
                "systematic bias {} is outside (-1, 1)",
                self.bias
            )));
        }
        if self.cost.dim() != self.population.dims {
            return Err(Error::Dimension {
                expected: self.population.dims,
                got: self.cost.dim(),
            });
        }
        if let Some(cols) = &self.classifier_features {
            if cols.is_empty() || cols.iter().any(|&c| c >= self.population.dims) {
                return Err(Error::config("classifier_features out of range"));
            }
        }
        Ok(())
    }

    /// Annotator's probability of labeling `x` positive: `clamp(P(Y=1|x) + μ, 0, 1)`.
    #[inline]
    pub fn annotation_prob(&self, x: &[f64]) -> f64 {
        clamp01(self.population.label_prob(x) + self.bias)
    }
}

/// Labels row-major `features` the way the (possibly biased) human annotator
/// would. One uniform draw per row.
pub fn human_annotate(spec: &GroupSpec, features: &[f64], rng: &mut SimRng) -> Result<Vec<u8>> {
    let d = spec.population.dims;
    if features.len() % d != 0 {
        return Err(Error::Dimension {
            expected: d,
            got: features.len() % d,
        });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("features must be finite"));
    }
    Ok(features
        .chunks_exact(d)
        .map(|x| bernoulli(rng, spec.annotation_prob(x)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MonotoneMethod {
    /// Sign structure of a linear or logistic label function.
    Analytic,
    /// Probe grid of the per-dimension likelihood ratio.
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub passed: bool,
    /// Dimensions along which `P(Y=1|x)` decreases somewhere.
    pub violations: Vec<usize>,
    pub method: MonotoneMethod,
}

/// Probe points per axis for the grid check.
pub const MONOTONE_GRID: usize = 101;
/// Mass of the central interval covered by the probe grid.
pub const MONOTONE_MASS: f64 = 0.999;

/// Checks that `P(Y=1|x)` is nondecreasing in every coordinate.
///
/// Linear and logistic label functions are decided by coefficient signs. In
/// conditional mode the posterior log-odds split into a sum of per-dimension
/// log likelihood ratios, so each axis is probed independently on a
/// 101-point grid over the central 99.9% interval.
pub fn validate_monotone_likelihood(spec: &PopulationSpec) -> MonotoneReport {
    match &spec.population {
        PopulationMode::Marginal { label_fn, .. } => {
            let violations: Vec<usize> = label_fn
                .coeffs()
                .iter()
                .enumerate()
                .filter(|(_, c)| **c < 0.0)
                .map(|(k, _)| k)
                .collect();
            MonotoneReport {
                passed: violations.is_empty(),
                violations,
                method: MonotoneMethod::Analytic,
            }
        }
        PopulationMode::Conditional {
            positive, negative, ..
        } => {
            let bounds = spec.central_box(MONOTONE_MASS);
            let mut violations = Vec::new();
            for (k, (lo, hi)) in bounds.into_iter().enumerate() {
                let mut prev = f64::NEG_INFINITY;
                let mut bad = false;
                for g in 0..MONOTONE_GRID {
                    let x = lo + (hi - lo) * g as f64 / (MONOTONE_GRID - 1) as f64;
                    let r =
                        libm::log(positive[k].pdf_inside(x)) - libm::log(negative[k].pdf_inside(x));
                    if r < prev - 1e-12 {
                        bad = true;
                        break;
                    }
                    prev = r;
                }
                if bad {
                    violations.push(k);
                }
            }
            MonotoneReport {
                passed: violations.is_empty(),
                violations,
                method: MonotoneMethod::Grid,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use alloc::vec;

    fn uniform_linear() -> PopulationSpec {
        PopulationSpec::marginal(
            vec![Distribution1D::Uniform { lo: 0.0, hi: 1.0 }; 2],
            LabelFn::Linear {
                coeffs: vec![0.5, 0.5],
                intercept: 0.0,
            },
        )
    }

    fn gaussian_logistic() -> PopulationSpec {
        PopulationSpec::marginal(
            vec![
                Distribution1D::Gaussian {
                    mean: 0.0,
                    stddev: 0.5
                };
                2
            ],
            LabelFn::Logistic {
                coeffs: vec![1.0, 1.0],
                intercept: 0.0,
            },
        )
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = uniform_linear();
        let a = sample_agents(&spec, 1, &mut stream(7)).unwrap();
        let b = sample_agents(&spec, 1, &mut stream(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_sample_size_is_rejected() {
        assert!(sample_agents(&uniform_linear(), 0, &mut stream(1)).is_err());
    }

    #[test]
    fn label_rates_match_q0() {
        for spec in [uniform_linear(), gaussian_logistic()] {
            let n = 200_000;
            let agents = sample_agents(&spec, n, &mut stream(3)).unwrap();
            let q0 = 0.5;
            let tol = 3.0 * libm::sqrt(q0 * (1.0 - q0) / n as f64);
            assert!(
                (agents.label_mean() - q0).abs() < tol,
                "{}",
                agents.label_mean()
            );
            assert!(agents.labels.iter().all(|&y| y <= 1));
        }
    }

    #[test]
    fn unbiased_annotation_reproduces_ground_truth_labels() {
        let spec = uniform_linear();
        let group = GroupSpec::new(
            "g",
            spec.clone(),
            0.0,
            CostModel::scaled_identity(2, 5.0).unwrap(),
        );
        let truth = sample_agents(&spec, 500, &mut stream(11)).unwrap();
        let mut rng = stream(11);
        let feats = spec.sample_features(500, &mut rng);
        let labels = human_annotate(&group, &feats, &mut rng).unwrap();
        assert_eq!(feats, truth.features);
        assert_eq!(labels, truth.labels);
    }

    #[test]
    fn annotation_clamps_probability() {
        let group = GroupSpec::new(
            "g",
            uniform_linear(),
            0.1,
            CostModel::scaled_identity(2, 5.0).unwrap(),
        );
        assert_eq!(group.annotation_prob(&[0.95, 0.95]), 1.0);
        let low = GroupSpec {
            bias: -0.1,
            ..group
        };
        assert_eq!(low.annotation_prob(&[0.0, 0.05]), 0.0);
    }

    #[test]
    fn rejects_non_finite_features() {
        let group = GroupSpec::new("g", uniform_linear(), 0.0, CostModel::identity(2));
        assert!(human_annotate(&group, &[0.1, f64::NAN], &mut stream(1)).is_err());
    }

    #[test]
    fn invalid_distributions_fail_validation() {
        assert!(Distribution1D::Uniform { lo: 1.0, hi: 1.0 }
            .validate()
            .is_err());
        assert!(Distribution1D::Gaussian {
            mean: 0.0,
            stddev: 0.0
        }
        .validate()
        .is_err());
        assert!(Distribution1D::Beta {
            alpha: 0.0,
            beta: 1.0
        }
        .validate()
        .is_err());
        assert!(Distribution1D::Kde {
            points: vec![0.3],
            bandwidth: 0.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn bounded_samples_stay_in_support() {
        let mut rng = stream(5);
        let u = Distribution1D::Uniform { lo: -2.0, hi: 3.0 };
        let b = Distribution1D::Beta {
            alpha: 0.7,
            beta: 2.5,
        };
        for _ in 0..10_000 {
            let x = u.sample(&mut rng);
            assert!((-2.0..3.0).contains(&x));
            let y = b.sample(&mut rng);
            assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn monotone_check_uses_coefficient_signs() {
        assert!(validate_monotone_likelihood(&gaussian_logistic()).passed);
        let bad = PopulationSpec::marginal(
            vec![Distribution1D::Uniform { lo: 0.0, hi: 1.0 }; 3],
            LabelFn::Linear {
                coeffs: vec![0.4, -0.1, 0.3],
                intercept: 0.2,
            },
        );
        let report = validate_monotone_likelihood(&bad);
        assert!(!report.passed);
        assert_eq!(report.violations, vec![1]);
    }

    #[test]
    fn conditional_posterior_is_a_probability() {
        let spec = PopulationSpec::conditional(
            vec![
                Distribution1D::Beta {
                    alpha: 1.37,
                    beta: 3.23,
                },
                Distribution1D::Beta {
                    alpha: 0.83,
                    beta: 2.83,
                },
            ],
            vec![
                Distribution1D::Beta {
                    alpha: 1.50,
                    beta: 4.94,
                },
                Distribution1D::Beta {
                    alpha: 0.84,
                    beta: 5.56,
                },
            ],
            0.473,
        );
        spec.validate().unwrap();
        for x in [[0.0, 0.0], [0.5, 0.2], [1.0, 1.0], [1.3, -0.2]] {
            let p = spec.label_prob(&x);
            assert!((0.0..=1.0).contains(&p), "{p}");
        }
        // Bayes inversion at an interior point.
        let x = [0.3, 0.4];
        let p1 = beta_pdf(0.3, 1.37, 3.23) * beta_pdf(0.4, 0.83, 2.83);
        let p0 = beta_pdf(0.3, 1.50, 4.94) * beta_pdf(0.4, 0.84, 5.56);
        let want = 0.473 * p1 / (0.473 * p1 + 0.527 * p0);
        assert!((spec.label_prob(&x) - want).abs() < 1e-12);
    }
}
