//! Linear threshold classifiers `f(x) = 1[h(x) ≥ θ]` and how they are fit.

use alloc::vec;
use alloc::vec::Vec;

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::math::{clamp01, dot, logit, sigmoid};
use crate::population::{GroupSpec, PopulationMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// `h = σ(w·x + b)`
    #[default]
    Logistic,
    /// `h = clamp(w·x + b, 0, 1)`
    Identity,
}

/// Where the accepted half-space starts on the linear score `w·x + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    AcceptAll,
    RejectAll,
    /// Accept iff `w·x + b ≥ τ`.
    At(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainInfo {
    pub samples: usize,
    pub epochs: usize,
    pub newton_iters: usize,
    pub final_loss: f64,
    /// Set when the training data held a single class and a constant
    /// scorer was returned.
    pub single_class: bool,
}

/// `h(x) = clamp(link(w·x + b) + offset, 0, 1)`, deciding `h(x) ≥ θ`.
///
/// `offset` is zero for learned models; the ground-truth scorer uses it to
/// carry the annotator's systematic bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
    #[serde(default)]
    pub link: Link,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub info: TrainInfo,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64, threshold: f64) -> Self {
        Self {
            weights,
            bias,
            threshold,
            link: Link::Logistic,
            offset: 0.0,
            info: TrainInfo::default(),
        }
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn dims(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    #[inline]
    pub fn score_of_margin(&self, m: f64) -> f64 {
        let h = match self.link {
            Link::Logistic => sigmoid(m),
            Link::Identity => clamp01(m),
        };
        clamp01(h + self.offset)
    }

    /// The decision boundary on the linear score. Deciding with the margin
    /// avoids rounding in `σ`, so a point placed exactly on the boundary is
    /// accepted.
    pub fn boundary(&self) -> Boundary {
        let p = self.threshold - self.offset;
        if p <= 0.0 {
            return Boundary::AcceptAll;
        }
        match self.link {
            Link::Logistic if p >= 1.0 => Boundary::RejectAll,
            Link::Logistic => Boundary::At(logit(p)),
            Link::Identity if p > 1.0 => Boundary::RejectAll,
            Link::Identity => Boundary::At(p),
        }
    }

    /// Unchecked decision for hot loops.
    #[inline]
    pub fn accepts(&self, x: &[f64]) -> bool {
        match self.boundary() {
            Boundary::AcceptAll => true,
            Boundary::RejectAll => false,
            Boundary::At(tau) => self.margin(x) >= tau,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.weights.len() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.weights.len(),
                got: x.len(),
            })
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.score_of_margin(self.margin(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        self.check(x)?;
        Ok(self.accepts(x) as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub epochs: usize,
    /// Initial step size; epoch `e` uses `learning_rate / sqrt(e + 1)`.
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Coefficient of `½‖w‖²` (the intercept is not penalized).
    pub l2: f64,
    /// Damped Newton iterations run after SGD; 0 disables them.
    pub newton_iters: usize,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.05,
            batch_size: 32,
            l2: 1e-4,
            newton_iters: 25,
            seed: 0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::config(
                "train settings need batch_size ≥ 1, learning_rate > 0, l2 ≥ 0",
            ));
        }
        Ok(())
    }
}

/// Borrowed row-major design matrix with binary labels.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub dims: usize,
    pub features: &'a [f64],
    pub labels: &'a [u8],
}

impl<'a> Dataset<'a> {
    pub fn new(dims: usize, features: &'a [f64], labels: &'a [u8]) -> Result<Self> {
        if dims == 0 || features.len() != dims * labels.len() {
            return Err(Error::Dimension {
                expected: dims * labels.len(),
                got: features.len(),
            });
        }
        Ok(Self {
            dims,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    /// Copies the selected columns into a new contiguous buffer.
    pub fn select(&self, columns: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * columns.len());
        for i in 0..self.len() {
            let r = self.row(i);
            out.extend(columns.iter().map(|&c| r[c]));
        }
        out
    }
}

/// Mean log-loss plus `½ l2 ‖w‖²`.
pub fn log_loss(data: &Dataset<'_>, weights: &[f64], bias: f64, l2: f64) -> f64 {
    let n = data.len() as f64;
    let mut total = 0.0;
    for i in 0..data.len() {
        let m = dot(weights, data.row(i)) + bias;
        // log(1 + e^m) - y m, computed stably
        let sp = if m > 0.0 {
            m + libm::log1p(libm::exp(-m))
        } else {
            libm::log1p(libm::exp(m))
        };
        total += sp - data.labels[i] as f64 * m;
    }
    total / n + 0.5 * l2 * dot(weights, weights)
}

/// Gradient of [`log_loss`] as `(∂w, ∂b)`.
pub fn log_loss_gradient(
    data: &Dataset<'_>,
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for i in 0..data.len() {
        let r = data.row(i);
        let e = sigmoid(dot(weights, r) + bias) - data.labels[i] as f64;
        for (g, x) in gw.iter_mut().zip(r) {
            *g += e * x;
        }
        gb += e;
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

/// Logistic regression by mini-batch SGD with a fixed shuffling schedule,
/// followed by damped Newton steps on the same objective.
///
/// `columns` restricts the classifier to a subset of features; the returned
/// weight vector still spans every feature, with zeros elsewhere. The
/// threshold is 0.5.
pub fn fit_logistic(
    data: &Dataset<'_>,
    settings: &TrainSettings,
    columns: Option<&[usize]>,
) -> Result<LinearModel> {
    settings.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let positives = data.labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == data.len() {
        let class = (positives > 0) as u8 as f64;
        let mut m = LinearModel::new(vec![0.0; data.dims], class, 0.5).with_link(Link::Identity);
        m.info = TrainInfo {
            samples: data.len(),
            single_class: true,
            ..TrainInfo::default()
        };
        return Ok(m);
    }
    let selected;
    let view = match columns {
        Some(cols) => {
            if cols.iter().any(|&c| c >= data.dims) || cols.is_empty() {
                return Err(Error::config("classifier feature index out of range"));
            }
            selected = data.select(cols);
            Dataset::new(cols.len(), &selected, data.labels)?
        }
        None => *data,
    };
    if view.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("training features must be finite"));
    }

    let p = view.dims;
    let n = view.len();
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SmallRng::seed_from_u64(settings.seed);
    let mut gw = vec![0.0; p];
    for epoch in 0..settings.epochs {
        let lr = settings.learning_rate / libm::sqrt(epoch as f64 + 1.0);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(settings.batch_size) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in batch {
                let r = view.row(i);
                let e = sigmoid(dot(&w, r) + b) - view.labels[i] as f64;
                for (g, x) in gw.iter_mut().zip(r) {
                    *g += e * x;
                }
                gb += e;
            }
            let scale = lr / batch.len() as f64;
            for (wk, g) in w.iter_mut().zip(&gw) {
                *wk -= scale * g + lr * settings.l2 * *wk;
            }
            b -= scale * gb;
        }
    }

    let iters = newton_polish(&view, &mut w, &mut b, settings.l2, settings.newton_iters);
    let final_loss = log_loss(&view, &w, b, settings.l2);

    let weights = match columns {
        Some(cols) => {
            let mut full = vec![0.0; data.dims];
            for (k, &c) in cols.iter().enumerate() {
                full[c] = w[k];
            }
            full
        }
        None => w,
    };
    let mut m = LinearModel::new(weights, b, 0.5);
    m.info = TrainInfo {
        samples: n,
        epochs: settings.epochs,
        newton_iters: iters,
        final_loss,
        single_class: false,
    };
    Ok(m)
}

fn newton_polish(
    data: &Dataset<'_>,
    w: &mut [f64],
    b: &mut f64,
    l2: f64,
    max_iters: usize,
) -> usize {
    let p = w.len();
    let q = p + 1;
    let n = data.len() as f64;
    let mut loss = log_loss(data, w, *b, l2);
    for it in 0..max_iters {
        let mut h = vec![0.0; q * q];
        let mut g = vec![0.0; q];
        for i in 0..data.len() {
            let r = data.row(i);
            let s = sigmoid(dot(w, r) + *b);
            let e = s - data.labels[i] as f64;
            let c = s * (1.0 - s);
            for a in 0..q {
                let xa = if a < p { r[a] } else { 1.0 };
                g[a] += e * xa;
                for bb in 0..=a {
                    let xb = if bb < p { r[bb] } else { 1.0 };
                    h[a * q + bb] += c * xa * xb;
                }
            }
        }
        for a in 0..q {
            g[a] /= n;
            for bb in 0..=a {
                h[a * q + bb] /= n;
                h[bb * q + a] = h[a * q + bb];
            }
            if a < p {
                g[a] += l2 * w[a];
                h[a * q + a] += l2;
            }
            h[a * q + a] += 1e-12;
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>();
        if gnorm < 1e-26 {
            return it;
        }
        let mut step = g.clone();
        if crate::linalg::solve_dense(&mut h, &mut step, q).is_none() {
            return it;
        }
        // Newton decrement; below this the step is pure rounding noise
        let decrement: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        if decrement < 1e-20 {
            for (wk, s) in w.iter_mut().zip(&step) {
                *wk -= s;
            }
            *b -= step[p];
            return it + 1;
        }
        // backtracking on the full step
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let nw: Vec<f64> = w.iter().zip(&step).map(|(wk, s)| wk - t * s).collect();
            let nb = *b - t * step[p];
            let nl = log_loss(data, &nw, nb, l2);
            if nl <= loss + 1e-15 * libm::fabs(loss) {
                w.copy_from_slice(&nw);
                *b = nb;
                loss = nl;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let size = t * step.iter().map(|v| libm::fabs(*v)).fold(0.0, f64::max);
        if !accepted || size < 1e-12 {
            return it + 1;
        }
    }
    max_iters
}

/// The scorer a perfectly realizable learner would converge to:
/// `h(x) = clamp(P(Y=1|x) + μ, 0, 1)`, thresholded at 0.5.
pub fn ground_truth_scorer(spec: &GroupSpec) -> Result<LinearModel> {
    match &spec.population.population {
        PopulationMode::Marginal { label_fn, .. } => {
            let link = match label_fn {
                crate::LabelFn::Linear { .. } => Link::Identity,
                crate::LabelFn::Logistic { .. } => Link::Logistic,
            };
            Ok(
                LinearModel::new(label_fn.coeffs().to_vec(), label_fn.intercept(), 0.5)
                    .with_link(link)
                    .with_offset(spec.bias),
            )
        }
        PopulationMode::Conditional { .. } => Err(Error::Unsupported(
            "ground-truth scorer needs a linear or logistic label function".into(),
        )),
    }
}
