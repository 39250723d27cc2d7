//! Named configurations for the standard experiments.
//!
//! Two-group configs put the advantaged group `i` (annotator bias `+μ`)
//! first and the disadvantaged group `j` (`−μ`) second.

use stratloop_core::multigroup::FairnessMode;
use stratloop_core::population::{Distribution1D, GroupSpec, LabelFn, PopulationSpec};
use stratloop_core::retrain::{AnnotationMode, MemoryMode};
use stratloop_core::{CostModel, RetrainConfig, SPEC_VERSION};

use crate::config::{ExperimentConfig, GroupRef, OutputConfig};
use crate::{ingest, synth};

const NAMES: &[&str] = &[
    "uniform_linear_r0",
    "uniform_linear_r005",
    "uniform_linear_r01",
    "uniform_linear_r03",
    "uniform_linear_cost36",
    "uniform_linear_noisy",
    "uniform_linear_refined",
    "uniform_linear_memoryless",
    "uniform_linear_nonstrategic",
    "gaussian_logistic_r0",
    "gaussian_logistic_r005",
    "gaussian_logistic_r01",
    "gaussian_logistic_r03",
    "gaussian_logistic_cost36",
    "gaussian_logistic_noisy",
    "gaussian_logistic_refined",
    "gaussian_logistic_memoryless",
    "gaussian_logistic_nonstrategic",
    "gaussian_logistic_disparate",
    "gaussian_logistic_dp",
    "german_credit",
    "credit_approval",
];

/// Master seed shared by every builtin.
pub const BUILTIN_SEED: u64 = 20240501;

pub fn names() -> &'static [&'static str] {
    NAMES
}

/// Uniform features on the unit square, `P(Y=1|x) = (x1 + x2) / 2`.
pub fn uniform_population() -> PopulationSpec {
    PopulationSpec::marginal(
        vec![Distribution1D::Uniform { lo: 0.0, hi: 1.0 }; 2],
        LabelFn::Linear {
            coeffs: vec![0.5, 0.5],
            intercept: 0.0,
        },
    )
}

/// `N(0, 0.5²)` features, logistic labels in `x1 + x2`.
pub fn gaussian_population() -> PopulationSpec {
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

/// Per-label Beta fits from the credit-approval data. The second group's
/// base rate is not recoverable from the published table, so a stand-in
/// value is used.
pub fn credit_approval_populations() -> [PopulationSpec; 2] {
    let b = |alpha, beta| Distribution1D::Beta { alpha, beta };
    [
        PopulationSpec::conditional(
            vec![b(1.37, 3.23), b(0.83, 2.83)],
            vec![b(1.50, 4.94), b(0.84, 5.56)],
            0.473,
        ),
        PopulationSpec::conditional(
            vec![b(1.73, 3.84), b(0.66, 2.50)],
            vec![b(1.59, 4.67), b(0.69, 3.86)],
            0.445,
        ),
    ]
}

fn five() -> CostModel {
    CostModel::scaled_identity(2, 5.0).expect("positive definite")
}

fn pair(pop: PopulationSpec, bias: f64, cost: CostModel) -> Vec<GroupRef> {
    vec![
        GroupRef::Inline(GroupSpec::new("i", pop.clone(), bias, cost.clone())),
        GroupRef::Inline(GroupSpec::new("j", pop, -bias, cost)),
    ]
}

fn retrain(trials: usize, r: f64) -> RetrainConfig {
    let n = 2000;
    RetrainConfig {
        n,
        k: (r * n as f64).round() as usize,
        r: Some(r),
        rounds: 15,
        trials,
        seed: BUILTIN_SEED,
        ..RetrainConfig::default()
    }
}

fn config(
    name: &str,
    description: &str,
    groups: Vec<GroupRef>,
    retrain: RetrainConfig,
) -> ExperimentConfig {
    ExperimentConfig {
        spec_version: SPEC_VERSION,
        name: name.into(),
        description: description.into(),
        groups,
        retrain,
        fairness: FairnessMode::None,
        parity_tolerance: None,
        output: OutputConfig {
            dir: format!("out/{name}").into(),
            ..OutputConfig::default()
        },
        threads: None,
    }
}

fn synthetic(name: &str, family: &str) -> Option<ExperimentConfig> {
    let (pop, label) = match family {
        "uniform_linear" => (uniform_population(), "Uniform features, linear labels"),
        "gaussian_logistic" => (gaussian_population(), "Gaussian features, logistic labels"),
        _ => return None,
    };
    let variant = &name[family.len() + 1..];
    let mut groups = pair(pop, 0.1, five());
    let mut rt = retrain(100, 0.05);
    let mut fairness = FairnessMode::None;
    let what = match variant {
        "r0" => {
            rt = retrain(100, 0.0);
            "r = 0"
        }
        "r005" => "r = 0.05",
        "r01" => {
            rt = retrain(100, 0.1);
            "r = 0.1"
        }
        "r03" => {
            rt = retrain(100, 0.3);
            "r = 0.3"
        }
        "cost36" => {
            let GroupRef::Inline(g) = &groups[0] else {
                unreachable!()
            };
            groups = pair(
                g.population.clone(),
                0.1,
                CostModel::diagonal(&[3.0, 6.0]).expect("positive"),
            );
            "cost diag(3, 6)"
        }
        "noisy" => {
            rt.noise_sigma = 0.1;
            "noisy best response, sigma = 0.1"
        }
        "refined" => {
            rt.annotation = AnnotationMode::Probabilistic;
            "probabilistic model annotation"
        }
        "memoryless" => {
            rt.memory = MemoryMode::RecentOnly;
            "training set holds only the latest round"
        }
        "nonstrategic" => {
            rt.strategic = false;
            "agents never move"
        }
        "disparate" => {
            fairness = FairnessMode::DisparateStrategies;
            "probabilistic annotation for i, hard for j"
        }
        "dp" => {
            rt.annotation = AnnotationMode::Probabilistic;
            fairness = FairnessMode::DpEveryRound;
            "probabilistic annotation, parity-constrained thresholds every round"
        }
        _ => return None,
    };
    let mut cfg = config(name, &format!("{label}, bias ±0.1, {what}"), groups, rt);
    cfg.fairness = fairness;
    Some(cfg)
}

/// The German-credit experiment over the bundled synthetic stand-in.
pub fn german_credit() -> ExperimentConfig {
    let table = synth::german_credit_like(1000, BUILTIN_SEED);
    let profile = ingest::ingest_table(
        &table,
        "<builtin german_credit>",
        &synth::german_credit_schema(),
    )
    .expect("stand-in table is well formed");
    let classifier: Vec<usize> = (0..10).collect();
    let groups = ["male", "female"]
        .iter()
        .zip([("i", 0.06), ("j", -0.06)])
        .map(|(sex, (id, bias))| {
            let fit = profile
                .fit_kde_logistic(sex, &classifier, &Default::default())
                .expect("stand-in groups are large enough");
            let dims = fit.spec.dims;
            let mut g = GroupSpec::new(
                id,
                fit.spec,
                bias,
                CostModel::scaled_identity(dims, 5.0).expect("positive"),
            );
            g.classifier_features = Some(classifier.clone());
            GroupRef::Inline(g)
        })
        .collect();
    config(
        "german_credit",
        "KDE features and logistic labels fitted per sex, bias ±0.06, first 10 features visible",
        groups,
        retrain(100, 0.05),
    )
}

pub fn credit_approval() -> ExperimentConfig {
    let [pi, pj] = credit_approval_populations();
    config(
        "credit_approval",
        "Per-label Beta conditionals for two groups, bias ±0.1",
        vec![
            GroupRef::Inline(GroupSpec::new("i", pi, 0.1, five())),
            GroupRef::Inline(GroupSpec::new("j", pj, -0.1, five())),
        ],
        retrain(50, 0.05),
    )
}

pub fn get(name: &str) -> Option<ExperimentConfig> {
    if !NAMES.contains(&name) {
        return None;
    }
    match name {
        "german_credit" => Some(german_credit()),
        "credit_approval" => Some(credit_approval()),
        _ => synthetic(name, "uniform_linear").or_else(|| synthetic(name, "gaussian_logistic")),
    }
}
