//! Synthetic tables with the same columns as the public datasets, so the
//! ingest path and the dataset-backed builtins run without the originals.

use std::io::Write;

use rand::Rng;
use stratloop_core::population::{sample_agents, Distribution1D, PopulationSpec};
use stratloop_core::rng::stream;

use crate::builtins::credit_approval_populations;
use crate::ingest::CsvSchema;

/// A header plus string cells, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            wr.write_record(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

enum Column {
    /// Integer codes `1..=levels`, skewed by a Beta draw.
    Levels(u32, f64, f64),
    /// `exp(N(mean, sd))`, rounded.
    LogNormal(f64, f64),
    /// Integer uniform on `[lo, hi]`.
    Range(u32, u32),
}

const GERMAN: [(&str, Column, f64); 19] = [
    ("status", Column::Levels(4, 1.2, 1.0), 0.9),
    ("duration", Column::Range(4, 72), -0.6),
    ("history", Column::Levels(5, 2.0, 1.5), 0.5),
    ("purpose", Column::Levels(10, 1.0, 2.0), 0.1),
    ("amount", Column::LogNormal(7.8, 0.75), -0.4),
    ("savings", Column::Levels(5, 0.8, 2.0), 0.4),
    ("employment", Column::Levels(5, 1.5, 1.3), 0.3),
    ("installment_rate", Column::Levels(4, 1.5, 1.0), -0.25),
    ("guarantors", Column::Levels(3, 0.4, 3.0), 0.15),
    ("residence", Column::Levels(4, 1.2, 1.0), 0.0),
    ("property", Column::Levels(4, 1.0, 1.4), -0.2),
    ("age", Column::Range(19, 75), 0.25),
    ("other_plans", Column::Levels(3, 2.5, 0.8), 0.2),
    ("housing", Column::Levels(3, 1.5, 1.5), 0.1),
    ("existing_credits", Column::Levels(4, 0.6, 2.5), -0.1),
    ("job", Column::Levels(4, 2.0, 1.2), -0.05),
    ("dependents", Column::Levels(2, 0.6, 2.0), 0.0),
    ("telephone", Column::Levels(2, 1.0, 1.5), 0.1),
    ("foreign_worker", Column::Levels(2, 3.0, 0.3), -0.3),
];

/// Columns of [`german_credit_like`]: 19 numeric features, `sex` in
/// {`male`, `female`} and a 0/1 `label` (1 = good credit).
pub fn german_credit_schema() -> CsvSchema {
    CsvSchema {
        features: GERMAN.iter().map(|(n, _, _)| n.to_string()).collect(),
        label: "label".into(),
        group: Some("sex".into()),
    }
}

pub fn german_credit_like(rows: usize, seed: u64) -> Table {
    let mut rng = stream(seed);
    let mut values = vec![vec![0.0; GERMAN.len()]; rows];
    for (k, (_, col, _)) in GERMAN.iter().enumerate() {
        for row in values.iter_mut() {
            row[k] = match *col {
                Column::Levels(l, a, b) => {
                    let u = Distribution1D::Beta { alpha: a, beta: b }.sample(&mut rng);
                    ((u * l as f64).floor() as u32).min(l - 1) as f64 + 1.0
                }
                Column::LogNormal(m, s) => Distribution1D::Gaussian { mean: m, stddev: s }
                    .sample(&mut rng)
                    .exp()
                    .round(),
                Column::Range(lo, hi) => rng.random_range(lo..=hi) as f64,
            };
        }
    }
    let (means, sds): (Vec<f64>, Vec<f64>) = (0..GERMAN.len())
        .map(|k| {
            let m = values.iter().map(|r| r[k]).sum::<f64>() / rows as f64;
            let v = values.iter().map(|r| (r[k] - m).powi(2)).sum::<f64>() / rows as f64;
            (m, v.sqrt().max(1e-12))
        })
        .unzip();
    let mut columns: Vec<String> = GERMAN.iter().map(|(n, _, _)| n.to_string()).collect();
    columns.push("sex".into());
    columns.push("label".into());
    let rows = values
        .into_iter()
        .map(|r| {
            let z: f64 = GERMAN
                .iter()
                .enumerate()
                .map(|(k, (_, _, beta))| beta * (r[k] - means[k]) / sds[k])
                .sum();
            let p = 1.0 / (1.0 + (-(0.95 + z)).exp());
            let sex = if rng.random::<f64>() < 0.69 {
                "male"
            } else {
                "female"
            };
            let y = (rng.random::<f64>() < p) as u8;
            let mut cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            cells.push(sex.into());
            cells.push(y.to_string());
            cells
        })
        .collect();
    Table { columns, rows }
}

/// Columns of [`credit_approval_like`]: two continuous features, a group
/// column in {`i`, `j`} and a 0/1 `approved` label.
pub fn credit_approval_schema() -> CsvSchema {
    CsvSchema {
        features: vec!["age".into(), "debt".into()],
        label: "approved".into(),
        group: Some("group".into()),
    }
}

/// Rows drawn from the published per-label Beta fits, rescaled to raw
/// units (age in years, debt in thousands).
pub fn credit_approval_like(rows_per_group: usize, seed: u64) -> Table {
    let mut rng = stream(seed);
    let mut rows = Vec::with_capacity(2 * rows_per_group);
    for (id, pop) in ["i", "j"].iter().zip(credit_approval_populations()) {
        let agents = sample_agents(&pop, rows_per_group, &mut rng).expect("valid population");
        for (k, y) in agents.labels.iter().enumerate() {
            let x = agents.feature(k);
            rows.push(vec![
                format!("{:.2}", 13.75 + x[0] * 66.5),
                format!("{:.3}", x[1] * 28.0),
                id.to_string(),
                y.to_string(),
            ]);
        }
    }
    Table {
        columns: vec![
            "age".into(),
            "debt".into(),
            "group".into(),
            "approved".into(),
        ],
        rows,
    }
}

/// `n` agents from any population, columns `x1..xd` and `y`.
pub fn from_population(spec: &PopulationSpec, n: usize, seed: u64) -> Table {
    let mut rng = stream(seed);
    let agents = sample_agents(spec, n, &mut rng).expect("valid population");
    let mut columns: Vec<String> = (1..=spec.dims).map(|k| format!("x{k}")).collect();
    columns.push("y".into());
    let rows = (0..n)
        .map(|k| {
            let mut r: Vec<String> = agents.feature(k).iter().map(|v| v.to_string()).collect();
            r.push(agents.labels[k].to_string());
            r
        })
        .collect();
    Table { columns, rows }
}
