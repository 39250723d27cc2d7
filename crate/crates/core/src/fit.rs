//! Fitting populations to data: per-label Beta marginals, Gaussian KDE
//! marginals and a logistic labeling function.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::learner::{fit_logistic, Dataset, TrainSettings};
use crate::math::{digamma, mean, trigamma, variance};
use crate::population::{Distribution1D, LabelFn, PopulationSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMethod {
    Moments,
    /// Moments were outside the Beta-feasible region or the data touched
    /// the support edges.
    MaximumLikelihood,
}

/// Minimum samples per (feature, label) cell for Beta fits.
pub const MIN_CELL: usize = 10;

/// Beta fit by the method of moments, falling back to maximum likelihood.
pub fn fit_beta(xs: &[f64]) -> Result<(f64, f64, BetaMethod)> {
    if xs.len() < 2 {
        return Err(Error::EmptyData);
    }
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::config("Beta fits need data in [0, 1]"));
    }
    let m = mean(xs);
    let v = variance(xs);
    if v > 0.0 && v < m * (1.0 - m) {
        let common = m * (1.0 - m) / v - 1.0;
        return Ok((m * common, (1.0 - m) * common, BetaMethod::Moments));
    }
    let (a, b) = beta_mle(xs)?;
    Ok((a, b, BetaMethod::MaximumLikelihood))
}

/// Newton iterations on the Beta likelihood equations, with data pulled
/// into `[1e-6, 1 - 1e-6]`.
pub fn beta_mle(xs: &[f64]) -> Result<(f64, f64)> {
    let eps = 1e-6;
    let n = xs.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in xs {
        let x = x.clamp(eps, 1.0 - eps);
        s1 += libm::log(x);
        s2 += libm::log1p(-x);
    }
    let (g1, g2) = (s1 / n, s2 / n);
    let (mut a, mut b) = (1.0, 1.0);
    for _ in 0..200 {
        let pab = digamma(a + b);
        let f1 = digamma(a) - pab - g1;
        let f2 = digamma(b) - pab - g2;
        let tab = trigamma(a + b);
        let (j11, j12, j22) = (trigamma(a) - tab, -tab, trigamma(b) - tab);
        let det = j11 * j22 - j12 * j12;
        if !(det.abs() > 0.0) {
            break;
        }
        let da = (j22 * f1 - j12 * f2) / det;
        let db = (j11 * f2 - j12 * f1) / det;
        let mut t = 1.0;
        while a - t * da <= 0.0 || b - t * db <= 0.0 {
            t *= 0.5;
        }
        a -= t * da;
        b -= t * db;
        if (t * da).abs() < 1e-12 * a && (t * db).abs() < 1e-12 * b {
            break;
        }
    }
    if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
        Ok((a, b))
    } else {
        Err(Error::config("Beta likelihood fit did not converge"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaConditionalFit {
    pub spec: PopulationSpec,
    /// Method used per feature, for `Y = 1` then `Y = 0`.
    pub methods: Vec<(BetaMethod, BetaMethod)>,
}

/// Fits `P(X_k | Y = y)` as independent Betas and takes `q0` from the
/// empirical positive rate.
pub fn fit_beta_conditionals(
    features: &[f64],
    dims: usize,
    labels: &[u8],
) -> Result<BetaConditionalFit> {
    let data = Dataset::new(dims, features, labels)?;
    let pos: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == 0).collect();
    if pos.len() < MIN_CELL || neg.len() < MIN_CELL {
        return Err(Error::config(alloc::format!(
            "Beta fits need at least {MIN_CELL} samples per label (have {} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    let mut positive = Vec::with_capacity(dims);
    let mut negative = Vec::with_capacity(dims);
    let mut methods = Vec::with_capacity(dims);
    for k in 0..dims {
        let col = |idx: &[usize]| idx.iter().map(|&i| data.row(i)[k]).collect::<Vec<f64>>();
        let (a1, b1, m1) = fit_beta(&col(&pos))?;
        let (a0, b0, m0) = fit_beta(&col(&neg))?;
        positive.push(Distribution1D::Beta {
            alpha: a1,
            beta: b1,
        });
        negative.push(Distribution1D::Beta {
            alpha: a0,
            beta: b0,
        });
        methods.push((m1, m0));
    }
    let q0 = pos.len() as f64 / data.len() as f64;
    let spec = PopulationSpec::conditional(positive, negative, q0);
    spec.validate()?;
    Ok(BetaConditionalFit { spec, methods })
}

/// Smallest bandwidth used when a column is (nearly) constant.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^(-1/5)`, floored.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len();
    let sd = libm::sqrt(variance(xs));
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (n - 1) as f64;
        let lo = libm::floor(h) as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    (0.9 * spread * libm::pow(n as f64, -0.2)).max(BANDWIDTH_FLOOR)
}

pub fn fit_kde(xs: &[f64]) -> Result<Distribution1D> {
    if xs.len() < 2 {
        return Err(Error::EmptyData);
    }
    Ok(Distribution1D::Kde {
        points: xs.to_vec(),
        bandwidth: silverman_bandwidth(xs),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeLogisticFit {
    pub spec: PopulationSpec,
    /// Columns replaced by `1 - x` so that every coefficient is nonnegative.
    pub flipped: Vec<usize>,
    /// Columns the classifier sees.
    pub classifier_features: Vec<usize>,
    pub bandwidths: Vec<f64>,
}

/// Minimum rows for [`fit_kde_logistic`].
pub const MIN_KDE_ROWS: usize = 100;

/// Fits a logistic label function on all features and a KDE marginal per
/// feature.
///
/// Columns with a negative coefficient are mirrored to `1 - x` (data
/// normalized to `[0, 1]` stays there), which turns the coefficient
/// positive and moves `c` into the intercept.
pub fn fit_kde_logistic(
    features: &[f64],
    dims: usize,
    labels: &[u8],
    classifier_features: &[usize],
    settings: &TrainSettings,
) -> Result<KdeLogisticFit> {
    let data = Dataset::new(dims, features, labels)?;
    if data.len() < MIN_KDE_ROWS {
        return Err(Error::config(alloc::format!(
            "KDE fits need at least {MIN_KDE_ROWS} rows, got {}",
            data.len()
        )));
    }
    if classifier_features.iter().any(|&c| c >= dims) {
        return Err(Error::config("classifier feature index out of range"));
    }
    let model = fit_logistic(&data, settings, None)?;
    if model.info.single_class {
        return Err(Error::config("labels hold a single class"));
    }
    let mut coeffs = model.weights.clone();
    let mut intercept = model.bias;
    let mut flipped = Vec::new();
    for (k, c) in coeffs.iter_mut().enumerate() {
        if *c < 0.0 {
            intercept += *c;
            *c = -*c;
            flipped.push(k);
        }
    }
    let mut marginals = Vec::with_capacity(dims);
    let mut bandwidths = Vec::with_capacity(dims);
    for k in 0..dims {
        let col: Vec<f64> = (0..data.len())
            .map(|i| {
                let v = data.row(i)[k];
                if flipped.contains(&k) {
                    1.0 - v
                } else {
                    v
                }
            })
            .collect();
        let kde = fit_kde(&col)?;
        if let Distribution1D::Kde { bandwidth, .. } = &kde {
            bandwidths.push(*bandwidth);
        }
        marginals.push(kde);
    }
    let spec = PopulationSpec::marginal(marginals, LabelFn::Logistic { coeffs, intercept });
    spec.validate()?;
    Ok(KdeLogisticFit {
        spec,
        flipped,
        classifier_features: classifier_features.to_vec(),
        bandwidths,
    })
}
