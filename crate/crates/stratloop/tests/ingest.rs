use stratloop::builtins::credit_approval_populations;
use stratloop::core::population::PopulationMode;
use stratloop::ingest::{ingest_table, CsvSchema};
use stratloop::synth::from_population;

#[test]
fn beta_fit_recovers_the_sampling_population() {
    let n = 20_000;
    for (k, truth) in credit_approval_populations().iter().enumerate() {
        let table = from_population(truth, n, 11 + k as u64);
        let schema = CsvSchema {
            features: vec!["x1".into(), "x2".into()],
            label: "y".into(),
            group: None,
        };
        let profile = ingest_table(&table, "sampled", &schema).unwrap();
        let fit = profile.fit_beta_conditionals("all").unwrap();

        let q0 = truth.base_rate();
        let se = (q0 * (1.0 - q0) / n as f64).sqrt();
        assert!(
            (fit.spec.base_rate() - q0).abs() < 3.0 * se,
            "q0 {} vs {q0}",
            fit.spec.base_rate()
        );

        let (
            PopulationMode::Conditional {
                positive, negative, ..
            },
            PopulationMode::Conditional {
                positive: tp,
                negative: tn,
                ..
            },
        ) = (&fit.spec.population, &truth.population)
        else {
            panic!("conditional populations expected");
        };
        for d in 0..2 {
            let (lo, hi) = profile.bounds[d];
            for (fitted, true_dist) in [(&positive[d], &tp[d]), (&negative[d], &tn[d])] {
                let back = lo + (hi - lo) * fitted.mean();
                assert!(
                    (back - true_dist.mean()).abs() < 0.01,
                    "dim {d}: {back} vs {}",
                    true_dist.mean()
                );
            }
        }
    }
}
