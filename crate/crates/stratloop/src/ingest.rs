//! Tabular datasets: parsing, min-max normalization and per-group
//! population fits.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stratloop_core::fit::{self, BetaConditionalFit, KdeLogisticFit};
use stratloop_core::TrainSettings;

use crate::synth::Table;

/// Which columns to read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<String>,
    pub label: String,
    /// Rows are split by this column's values; everything is one group
    /// named `all` when absent.
    #[serde(default)]
    pub group: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("line {line}: missing value in column {column:?}")]
    Missing { line: u64, column: String },
    #[error("line {line}: column {column:?} holds non-numeric value {value:?}")]
    NotNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: label {value:?} is not 0 or 1")]
    NonBinaryLabel { line: u64, value: String },
    #[error("column {0:?} is constant, so min-max normalization is undefined")]
    ConstantColumn(String),
    #[error("no data rows")]
    Empty,
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error(transparent)]
    Fit(#[from] stratloop_core::Error),
}

/// Normalized rows belonging to one group value.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRows {
    /// Row-major, every value in `[0, 1]`.
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
}

impl GroupRows {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetProfile {
    pub source: String,
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub group_column: Option<String>,
    /// `(min, max)` of each raw feature column.
    pub bounds: Vec<(f64, f64)>,
    pub groups: BTreeMap<String, GroupRows>,
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<DatasetProfile, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_reader(file, &path.display().to_string(), schema)
}

pub fn ingest_reader<R: Read>(
    reader: R,
    source: &str,
    schema: &CsvSchema,
) -> Result<DatasetProfile, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(1, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    build(source, &header, rows, schema)
}

/// Same as [`ingest_csv`] for an in-memory table. Line numbers count the
/// header as line 1.
pub fn ingest_table(
    table: &Table,
    source: &str,
    schema: &CsvSchema,
) -> Result<DatasetProfile, IngestError> {
    let rows = table
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| (k as u64 + 2, r.clone()))
        .collect();
    build(source, &table.columns, rows, schema)
}

fn malformed(line: u64, e: impl std::fmt::Display) -> IngestError {
    IngestError::Malformed {
        line,
        message: e.to_string(),
    }
}

fn build(
    source: &str,
    header: &[String],
    rows: Vec<(u64, Vec<String>)>,
    schema: &CsvSchema,
) -> Result<DatasetProfile, IngestError> {
    let col = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::UnknownColumn(name.clone()))
    };
    let feat_idx = schema
        .features
        .iter()
        .map(col)
        .collect::<Result<Vec<_>, _>>()?;
    let label_idx = col(&schema.label)?;
    let group_idx = schema.group.as_ref().map(col).transpose()?;
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    let dims = feat_idx.len();
    let mut raw: Vec<(String, Vec<f64>, u8)> = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if rec.len() != header.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let cell = |k: usize| -> Result<&str, IngestError> {
            let v = rec[k].trim();
            if v.is_empty()
                || v == "?"
                || v.eq_ignore_ascii_case("na")
                || v.eq_ignore_ascii_case("nan")
            {
                Err(IngestError::Missing {
                    line,
                    column: header[k].clone(),
                })
            } else {
                Ok(v)
            }
        };
        let mut x = Vec::with_capacity(dims);
        for &k in &feat_idx {
            let v = cell(k)?;
            let parsed: f64 = v
                .parse()
                .ok()
                .filter(|f: &f64| f.is_finite())
                .ok_or_else(|| IngestError::NotNumeric {
                    line,
                    column: header[k].clone(),
                    value: v.to_string(),
                })?;
            x.push(parsed);
        }
        let lv = cell(label_idx)?;
        let y = match lv.parse::<f64>() {
            Ok(f) if f == 0.0 => 0,
            Ok(f) if f == 1.0 => 1,
            _ => {
                return Err(IngestError::NonBinaryLabel {
                    line,
                    value: lv.to_string(),
                })
            }
        };
        let g = match group_idx {
            Some(k) => cell(k)?.to_string(),
            None => "all".to_string(),
        };
        raw.push((g, x, y));
    }
    let mut bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); dims];
    for (_, x, _) in &raw {
        for (b, v) in bounds.iter_mut().zip(x) {
            b.0 = b.0.min(*v);
            b.1 = b.1.max(*v);
        }
    }
    for (k, (lo, hi)) in bounds.iter().enumerate() {
        if !(hi > lo) {
            return Err(IngestError::ConstantColumn(schema.features[k].clone()));
        }
    }
    let mut groups: BTreeMap<String, GroupRows> = BTreeMap::new();
    for (g, x, y) in raw {
        let entry = groups.entry(g).or_insert_with(|| GroupRows {
            features: Vec::new(),
            labels: Vec::new(),
        });
        entry.features.extend(
            x.iter()
                .zip(&bounds)
                .map(|(v, (lo, hi))| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)),
        );
        entry.labels.push(y);
    }
    Ok(DatasetProfile {
        source: source.to_string(),
        feature_columns: schema.features.clone(),
        label_column: schema.label.clone(),
        group_column: schema.group.clone(),
        bounds,
        groups,
    })
}

impl DatasetProfile {
    pub fn dims(&self) -> usize {
        self.feature_columns.len()
    }

    pub fn rows(&self) -> usize {
        self.groups.values().map(GroupRows::len).sum()
    }

    pub fn group(&self, id: &str) -> Result<&GroupRows, IngestError> {
        self.groups
            .get(id)
            .ok_or_else(|| IngestError::UnknownGroup(id.to_string()))
    }

    /// Per-label Beta conditionals for one group.
    pub fn fit_beta_conditionals(&self, group: &str) -> Result<BetaConditionalFit, IngestError> {
        let g = self.group(group)?;
        Ok(fit::fit_beta_conditionals(
            &g.features,
            self.dims(),
            &g.labels,
        )?)
    }

    /// KDE marginals plus a logistic label function for one group.
    pub fn fit_kde_logistic(
        &self,
        group: &str,
        classifier_features: &[usize],
        settings: &TrainSettings,
    ) -> Result<KdeLogisticFit, IngestError> {
        let g = self.group(group)?;
        Ok(fit::fit_kde_logistic(
            &g.features,
            self.dims(),
            &g.labels,
            classifier_features,
            settings,
        )?)
    }
}
