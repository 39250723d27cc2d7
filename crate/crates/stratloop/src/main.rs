use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use stratloop::builtins;
use stratloop::config::{ConfigError, ExperimentConfig, Overrides, RetrainMode};
use stratloop::ingest::{ingest_csv, CsvSchema};
use stratloop::runner::{run_experiment, RunError};
use stratloop::synth;
use stratloop_core::multigroup::FairnessMode;
use stratloop_core::{CostModel, GroupSpec};

#[derive(Parser)]
#[command(
    name = "stratloop",
    version,
    about = "Retraining simulator for strategic agents and biased annotators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV traces and summary.
    Run {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Print the summary JSON to stdout.
        #[arg(long)]
        print_summary: bool,
    },
    /// List builtin configs.
    List,
    /// Check a config and list every problem found.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Print a config, with overrides applied, as JSON.
    Show {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Write a synthetic stand-in for one of the public datasets.
    SynthData {
        #[arg(long, value_enum)]
        kind: DataKind,
        #[arg(long)]
        out: PathBuf,
        /// Rows (per group for credit-approval).
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Fit per-group populations from a CSV and write each as a group file.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        /// Comma-separated feature columns.
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
        #[arg(long)]
        label: String,
        #[arg(long)]
        group: Option<String>,
        #[arg(long, value_enum, default_value_t = FitMethod::Beta)]
        method: FitMethod,
        /// Classifier-visible feature count for KDE fits (the first k columns).
        #[arg(long)]
        classifier_features: Option<usize>,
        /// Cost matrix of the written groups is this multiple of the identity.
        #[arg(long, default_value_t = 5.0)]
        cost_scale: f64,
        /// Annotation bias written into every group; usually set per group
        /// in the experiment config instead.
        #[arg(long, default_value_t = 0.0)]
        bias: f64,
        /// Directory receiving one `<group>.json` per group.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct Source {
    /// Config file path or builtin name.
    #[arg(long)]
    config: String,
}

#[derive(clap::Args)]
struct OverrideArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    fairness: Option<FairnessArg>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Human-annotated ratio K/N; sets K from N.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Original,
    Refined,
    Memoryless,
}

#[derive(Clone, Copy, ValueEnum)]
enum FairnessArg {
    None,
    Dp,
    DpEarlyStop,
    Disparate,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    GermanCredit,
    CreditApproval,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    Beta,
    Kde,
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            trials: self.trials,
            seed: self.seed,
            out: self.out.clone(),
            mode: self.mode.map(|m| match m {
                ModeArg::Original => RetrainMode::Original,
                ModeArg::Refined => RetrainMode::Refined,
                ModeArg::Memoryless => RetrainMode::Memoryless,
            }),
            fairness: self.fairness.map(|f| match f {
                FairnessArg::None => FairnessMode::None,
                FairnessArg::Dp => FairnessMode::DpEveryRound,
                FairnessArg::DpEarlyStop => FairnessMode::EarlyStop,
                FairnessArg::Disparate => FairnessMode::DisparateStrategies,
            }),
            noise_sigma: self.noise_sigma,
            r: self.r,
            rounds: self.rounds,
        }
    }
}

/// Loads a config from a file, or from the builtin table when no such
/// file exists. Returns the directory that group files resolve against.
fn load(source: &Source) -> Result<(ExperimentConfig, Option<PathBuf>), ConfigError> {
    let path = Path::new(&source.config);
    if path.exists() {
        let cfg = ExperimentConfig::load(path)?;
        Ok((cfg, path.parent().map(Path::to_path_buf)))
    } else if let Some(cfg) = builtins::get(&source.config) {
        Ok((cfg, None))
    } else {
        Err(ConfigError(vec![stratloop::config::Issue {
            path: "--config".into(),
            message: format!("{:?} is neither a file nor a builtin config", source.config),
        }]))
    }
}

fn run(source: &Source, overrides: &OverrideArgs, print_summary: bool) -> Result<(), RunError> {
    let (mut cfg, base) = load(source)?;
    cfg.apply(&overrides.to_overrides());
    let resolved = cfg.resolve(base.as_deref())?;
    let out = run_experiment(&resolved)?;
    for p in &out.written {
        eprintln!("wrote {}", p.display());
    }
    if print_summary {
        println!(
            "{}",
            serde_json::to_string_pretty(&out.summary).map_err(anyhow::Error::from)?
        );
    }
    Ok(())
}

fn synth_data(kind: DataKind, out: &Path, rows: Option<usize>, seed: u64) -> anyhow::Result<()> {
    let table = match kind {
        DataKind::GermanCredit => synth::german_credit_like(rows.unwrap_or(1000), seed),
        DataKind::CreditApproval => synth::credit_approval_like(rows.unwrap_or(345), seed),
    };
    let f = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    table.write_csv(f)?;
    let schema = match kind {
        DataKind::GermanCredit => synth::german_credit_schema(),
        DataKind::CreditApproval => synth::credit_approval_schema(),
    };
    eprintln!(
        "wrote {} ({} rows; features {}, label {}, group {})",
        out.display(),
        table.rows.len(),
        schema.features.join(","),
        schema.label,
        schema.group.unwrap_or_default()
    );
    Ok(())
}

struct FitArgs {
    method: FitMethod,
    classifier: Option<usize>,
    cost_scale: f64,
    bias: f64,
}

fn fit(csv: &Path, schema: CsvSchema, args: FitArgs, out: &Path) -> anyhow::Result<()> {
    let profile = ingest_csv(csv, &schema)?;
    let cost = CostModel::scaled_identity(profile.dims(), args.cost_scale)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (id, rows) in &profile.groups {
        let group = match args.method {
            FitMethod::Beta => {
                let fit = profile.fit_beta_conditionals(id)?;
                eprintln!(
                    "{id}: {} rows, q0 = {:.4}, methods {:?}",
                    rows.len(),
                    fit.spec.base_rate(),
                    fit.methods
                );
                GroupSpec::new(id.as_str(), fit.spec, args.bias, cost.clone())
            }
            FitMethod::Kde => {
                let cols: Vec<usize> = (0..args
                    .classifier
                    .unwrap_or(profile.dims())
                    .min(profile.dims()))
                    .collect();
                let fit = profile.fit_kde_logistic(id, &cols, &Default::default())?;
                eprintln!(
                    "{id}: {} rows, mirrored columns {:?}",
                    rows.len(),
                    fit.flipped
                );
                let mut g = GroupSpec::new(id.as_str(), fit.spec, args.bias, cost.clone());
                g.classifier_features = Some(fit.classifier_features);
                g
            }
        };
        group.validate()?;
        let json = serde_json::to_string_pretty(&group)?;
        let path = out.join(format!("{id}.json"));
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), RunError> = match &cli.command {
        Command::Run {
            source,
            overrides,
            print_summary,
        } => run(source, overrides, *print_summary),
        Command::List => {
            let mut out = std::io::stdout().lock();
            for name in builtins::names() {
                let cfg = builtins::get(name).expect("listed builtin exists");
                if writeln!(out, "{name}\t{}", cfg.description).is_err() {
                    break;
                }
            }
            Ok(())
        }
        Command::Validate { source } => load(source)
            .and_then(|(cfg, base)| cfg.resolve(base.as_deref()).map(|_| ()))
            .map(|()| println!("ok"))
            .map_err(RunError::from),
        Command::Show { source, overrides } => {
            load(source).map_err(RunError::from).map(|(mut cfg, _)| {
                cfg.apply(&overrides.to_overrides());
                println!("{}", cfg.to_json());
            })
        }
        Command::SynthData {
            kind,
            out,
            rows,
            seed,
        } => synth_data(*kind, out, *rows, *seed).map_err(RunError::from),
        Command::Fit {
            csv,
            features,
            label,
            group,
            method,
            classifier_features,
            cost_scale,
            bias,
            out,
        } => {
            let schema = CsvSchema {
                features: features.clone(),
                label: label.clone(),
                group: group.clone(),
            };
            let args = FitArgs {
                method: *method,
                classifier: *classifier_features,
                cost_scale: *cost_scale,
                bias: *bias,
            };
            fit(csv, schema, args, out).map_err(RunError::from)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
