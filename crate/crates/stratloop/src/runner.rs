//! Parallel trials and the on-disk artifacts.
//!
//! Trial `k` runs with seed `hash64(master_seed, k)`. Results are collected
//! in trial order whatever the pool size, and floats are written with
//! Rust's shortest round-trip formatting, so output files are
//! byte-identical for a given config.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use stratloop_core::analytics::{aggregate, trace_rows, AggregateRow, Stat, TraceRow};
use stratloop_core::fairness::early_stop_scan;
use stratloop_core::multigroup::{run_groups, TrialTrace};
use stratloop_core::rng::trial_seed;

use crate::config::{ConfigError, Issue, ResolvedConfig};

pub const TRACE_FILE: &str = "trace.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const TRACE_COLUMNS: [&str; 10] = [
    "trial",
    "round",
    "group",
    "a",
    "q",
    "delta",
    "qbar",
    "theta",
    "unfairness",
    "mode_flags",
];

pub const AGGREGATE_COLUMNS: [&str; 16] = [
    "round",
    "group",
    "n_trials",
    "a_mean",
    "a_stderr",
    "q_mean",
    "q_stderr",
    "delta_mean",
    "delta_stderr",
    "qbar_mean",
    "qbar_stderr",
    "theta_mean",
    "theta_stderr",
    "unfairness_mean",
    "unfairness_stderr",
    "mode_flags",
];

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl RunError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub id: String,
    /// Population base rate.
    pub q0: f64,
    /// Mean measured `q` at round 0.
    pub q0_measured: f64,
    pub final_a: Stat,
    pub final_q: Stat,
    pub final_delta: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnfairnessSummary {
    /// Round where the mean unfairness is smallest (first one on ties).
    pub minimum_round: usize,
    pub minimum: f64,
    pub initial: Stat,
    pub final_value: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub spec_version: u32,
    pub master_seed: u64,
    pub seed_rule: &'static str,
    pub trials: usize,
    pub rounds: usize,
    pub mode_flags: String,
    pub groups: Vec<GroupSummary>,
    pub unfairness: Option<UnfairnessSummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub traces: Vec<TrialTrace>,
    pub rows: Vec<TraceRow>,
    pub aggregate: Vec<AggregateRow>,
    pub summary: Summary,
    pub written: Vec<PathBuf>,
}

/// Pool size: the config's `threads` (or the machine's parallelism),
/// capped by `STRATLOOP_THREADS` when set.
pub fn worker_count(configured: Option<usize>) -> usize {
    let base =
        configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cap = std::env::var("STRATLOOP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    cap.map_or(base, |c| base.min(c)).max(1)
}

/// Runs every trial and returns the traces in trial order.
pub fn simulate(resolved: &ResolvedConfig) -> anyhow::Result<Vec<TrialTrace>> {
    let cfg = &resolved.config;
    let r = &cfg.retrain;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg.threads))
        .build()
        .context("building worker pool")?;
    pool.install(|| {
        (0..r.trials)
            .into_par_iter()
            .map(|k| {
                run_groups(
                    &resolved.groups,
                    r,
                    cfg.fairness,
                    cfg.parity_tolerance,
                    k,
                    trial_seed(r.seed, k as u64),
                )
                .with_context(|| format!("trial {k}"))
            })
            .collect()
    })
}

fn check_writable(dir: &Path) -> Result<(), ConfigError> {
    let fail = |e: std::io::Error| {
        ConfigError(vec![Issue {
            path: "output.dir".into(),
            message: format!("{} is not writable: {e}", dir.display()),
        }])
    };
    fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".stratloop-write-check");
    fs::write(&probe, b"").map_err(fail)?;
    let _ = fs::remove_file(probe);
    Ok(())
}

/// Validates the output directory, runs all trials and writes the enabled
/// artifacts.
pub fn run_experiment(resolved: &ResolvedConfig) -> Result<RunOutput, RunError> {
    let cfg = &resolved.config;
    let out = &cfg.output;
    let writes = out.per_trial_csv || out.aggregate_csv || out.summary_json;
    if writes {
        check_writable(&out.dir)?;
    }
    let traces = simulate(resolved)?;
    let rows: Vec<TraceRow> = traces.iter().flat_map(trace_rows).collect();
    let agg = aggregate(&rows).context("aggregating traces")?;
    let summary = summarize(resolved, &traces, &agg)?;
    let flags = cfg.mode_flags();
    let mut written = Vec::new();
    if out.per_trial_csv {
        let p = out.dir.join(TRACE_FILE);
        write_atomic(&p, &trace_csv(&rows, &flags)?)?;
        written.push(p);
    }
    if out.aggregate_csv {
        let p = out.dir.join(AGGREGATE_FILE);
        write_atomic(&p, &aggregate_csv(&agg, &flags)?)?;
        written.push(p);
    }
    if out.summary_json {
        let p = out.dir.join(SUMMARY_FILE);
        let mut text = serde_json::to_string_pretty(&summary).context("serializing summary")?;
        text.push('\n');
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(RunOutput {
        traces,
        rows,
        aggregate: agg,
        summary,
        written,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_csv(rows: &[TraceRow], flags: &str) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.trial.to_string(),
            r.round.to_string(),
            r.group.clone(),
            r.a.to_string(),
            r.q.to_string(),
            r.delta.to_string(),
            r.qbar.to_string(),
            r.theta.to_string(),
            opt(r.unfairness),
            flags.to_string(),
        ])?;
    }
    Ok(w.into_inner().context("flushing trace csv")?)
}

pub fn aggregate_csv(rows: &[AggregateRow], flags: &str) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_COLUMNS)?;
    for r in rows {
        let mut rec = vec![r.round.to_string(), r.group.clone(), r.n_trials.to_string()];
        for s in [r.a, r.q, r.delta, r.qbar, r.theta] {
            rec.push(s.mean.to_string());
            rec.push(s.stderr.to_string());
        }
        rec.push(opt(r.unfairness.map(|s| s.mean)));
        rec.push(opt(r.unfairness.map(|s| s.stderr)));
        rec.push(flags.to_string());
        w.write_record(rec)?;
    }
    Ok(w.into_inner().context("flushing aggregate csv")?)
}

fn summarize(
    resolved: &ResolvedConfig,
    traces: &[TrialTrace],
    agg: &[AggregateRow],
) -> anyhow::Result<Summary> {
    let cfg = &resolved.config;
    let last = cfg.retrain.rounds;
    let groups = resolved
        .groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let col = |t: usize, f: fn(&stratloop_core::RoundRecord) -> f64| {
                Stat::of(
                    &traces
                        .iter()
                        .map(|tr| f(&tr.groups[k].records[t]))
                        .collect::<Vec<_>>(),
                )
            };
            GroupSummary {
                id: g.id.clone(),
                q0: g.population.base_rate(),
                q0_measured: col(0, |r| r.q).mean,
                final_a: col(last, |r| r.a),
                final_q: col(last, |r| r.q),
                final_delta: col(last, |r| r.delta),
            }
        })
        .collect();
    let unfairness = if resolved.groups.len() == 2 {
        let first = &resolved.groups[0].id;
        let means: Vec<f64> = agg
            .iter()
            .filter(|r| &r.group == first)
            .filter_map(|r| r.unfairness.map(|s| s.mean))
            .collect();
        let (minimum_round, minimum) = early_stop_scan(&means)?;
        let at = |t: usize| {
            Stat::of(
                &traces
                    .iter()
                    .filter_map(|tr| tr.unfairness.as_ref().map(|u| u[t]))
                    .collect::<Vec<_>>(),
            )
        };
        Some(UnfairnessSummary {
            minimum_round,
            minimum,
            initial: at(0),
            final_value: at(last),
        })
    } else {
        None
    };
    Ok(Summary {
        name: cfg.name.clone(),
        spec_version: cfg.spec_version,
        master_seed: cfg.retrain.seed,
        seed_rule: "seed_trial = hash64(master_seed, trial_index)",
        trials: cfg.retrain.trials,
        rounds: last,
        mode_flags: cfg.mode_flags(),
        groups,
        unfairness,
    })
}
