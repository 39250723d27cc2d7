#![allow(dead_code)]

use stratloop_core::population::{Distribution1D, GroupSpec, LabelFn, PopulationSpec};
use stratloop_core::CostModel;

pub fn uniform_spec() -> PopulationSpec {
    PopulationSpec::marginal(
        vec![Distribution1D::Uniform { lo: 0.0, hi: 1.0 }; 2],
        LabelFn::Linear {
            coeffs: vec![0.5, 0.5],
            intercept: 0.0,
        },
    )
}

pub fn gaussian_spec() -> PopulationSpec {
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

pub fn group(id: &str, spec: PopulationSpec, bias: f64, b: f64) -> GroupSpec {
    GroupSpec::new(id, spec, bias, CostModel::scaled_identity(2, b).unwrap())
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let mut s = 0.0;
    let mut n = 0;
    for x in xs {
        s += x;
        n += 1;
    }
    (s / n as f64, n)
}
