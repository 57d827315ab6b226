//! `intreg` command-line interface.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
//! Failures print a single `error: <kind>: <message>` line on stderr.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use intreg::datagen::validate::{ambiguity_profile, run_suite, SuiteConfig};
use intreg::datagen::{acceptance_rate_theoretical, make_interval_dataset, GenConfig, SamplerKind};
use intreg::harness::{fraction_sweep, run_experiment, write_plot_data, write_report, write_report_csv};
use intreg::io::{read_interval_csv, read_labeled_csv, write_interval_csv, write_labeled_csv_to};
use intreg::metrics::evaluate;
use intreg::models::{ModelKind, ModelParams, ModelSpec};
use intreg::optim::{train, TrainConfig};
use intreg::{Error, ExperimentConfig, IntervalDataset, LabeledDataset, LossSpec, RngHandle, Supervision};

#[derive(Parser, Debug)]
#[command(name = "intreg", version, about = "Regression with interval targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sampler {
    Direct,
    Rejection,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Model {
    Linear,
    Mlp,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replace the labels of a labeled CSV with generated intervals.
    Gen {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = positive)]
        q: f64,
        #[arg(long, value_enum, default_value = "direct")]
        sampler: Sampler,
        /// Clip interval endpoints into the label range after sampling.
        #[arg(long)]
        clamp: bool,
        /// Label range used by the rejection sampler and clamping
        /// (defaults to the observed range).
        #[arg(long, requires = "y_max")]
        y_min: Option<f64>,
        #[arg(long, requires = "y_min")]
        y_max: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and save its parameters as JSON.
    Train {
        /// Interval CSV (y_lower,y_upper[,y_true]) or labeled CSV (y).
        #[arg(long)]
        data: PathBuf,
        /// Validation data in the same format; defaults to the training data.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "linear")]
        model: Model,
        /// Loss label, e.g. surrogate_lm, middlemost:mae, avgl:huber(1), supervised:mse.
        #[arg(long, default_value = "surrogate_lm")]
        loss: String,
        #[arg(long, default_value_t = 1e-3, value_parser = positive)]
        lr: f64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: u64,
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
        batch_size: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-epoch training and validation risk.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Score a saved model against true targets.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Labeled CSV, or interval CSV with a y_true column.
        #[arg(long)]
        data: PathBuf,
        /// Write the metrics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write predictions as a labeled CSV (features, prediction).
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Run an experiment config and write the aggregated report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write `method,q,metric,mean,std` rows.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run the config's fraction sweep and write `q,fraction,mean_mse,std_mse` rows.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
    /// Run only the fraction sweep of an experiment config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
    /// Statistical checks of the interval generator.
    Validate {
        #[arg(long, default_value_t = 4.0, value_parser = positive)]
        q: f64,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        y_min: f64,
        #[arg(long, default_value_t = 10.0)]
        y_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probability that an interval containing y also contains y + d.
    Ambiguity {
        #[arg(long, value_parser = positive)]
        q: f64,
        /// Number of steps between d = 0 and d = q.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        grid: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    line: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: 1,
            line: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        line: format!("usage-error: {}", msg.into()),
    }
}

fn runtime(kind: &str, msg: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        line: format!("{kind}: {}", msg.into()),
    }
}

type CliResult = Result<(), Failure>;

enum Data {
    Labeled(LabeledDataset),
    Weak(IntervalDataset),
}

impl Data {
    fn load(path: &Path) -> Result<Data, Failure> {
        let bytes = fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        match read_interval_csv(&bytes[..]) {
            Ok(d) => Ok(Data::Weak(d)),
            Err(Error::Schema(_)) => Ok(Data::Labeled(read_labeled_csv(&bytes[..])?)),
            Err(e) => Err(e.into()),
        }
    }

    fn labeled(self, path: &Path) -> Result<LabeledDataset, Failure> {
        match self {
            Data::Labeled(d) => Ok(d),
            Data::Weak(d) => d.to_labeled().ok_or_else(|| {
                runtime(
                    "type-error",
                    format!("{} has intervals but no y_true column", path.display()),
                )
            }),
        }
    }

    /// Training view for `loss`: exact labels for supervised losses,
    /// intervals otherwise.
    fn for_loss(self, loss: &LossSpec, path: &Path) -> Result<Box<dyn Supervision>, Failure> {
        if loss.needs_exact_labels() {
            return Ok(Box::new(self.labeled(path)?));
        }
        match self {
            Data::Weak(d) => Ok(Box::new(d)),
            Data::Labeled(_) => Err(runtime(
                "type-error",
                format!("{} needs interval data, {} has exact labels", loss.label(), path.display()),
            )),
        }
    }
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(e).into()),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e).into()),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::Json)?;
    text.push('\n');
    Ok(text)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.is_file() {
        return Err(usage(format!("config file {} not found", path.display())));
    }
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::InvalidConfig(_) | Error::Json(_) => Failure {
            code: 2,
            line: e.to_string(),
        },
        other => other.into(),
    })
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen {
            input,
            q,
            sampler,
            clamp,
            y_min,
            y_max,
            seed,
            out,
        } => {
            let mut data = Data::load(&input)?.labeled(&input)?;
            if let (Some(lo), Some(hi)) = (y_min, y_max) {
                data = data.with_label_range(lo, hi)?;
            }
            let cfg = GenConfig {
                q,
                clamp_to_label_range: clamp,
                sampler: match sampler {
                    Sampler::Direct => SamplerKind::Direct,
                    Sampler::Rejection => SamplerKind::Rejection,
                },
            };
            let (weak, stats) = make_interval_dataset(&data, &cfg, &mut RngHandle::new(seed))?;
            write_interval_csv(&weak, &out)?;
            let mut report = serde_json::to_value(stats).map_err(Error::Json)?;
            if cfg.sampler == SamplerKind::Rejection {
                if let Some((lo, hi)) = data.label_range() {
                    report["theoretical_acceptance"] = acceptance_rate_theoretical(q, lo, hi)?.into();
                }
            }
            write_text(None, &to_json(&report)?)
        }
        Command::Train {
            data,
            val,
            model,
            loss,
            lr,
            epochs,
            batch_size,
            seed,
            out,
            history,
        } => {
            let loss: LossSpec = loss.parse().map_err(|e: Error| usage(e.to_string()))?;
            if !loss.is_differentiable() {
                return Err(usage(format!("{} cannot be trained", loss.label())));
            }
            let train_data = Data::load(&data)?.for_loss(&loss, &data)?;
            let val_path = val.unwrap_or_else(|| data.clone());
            let val_data = Data::load(&val_path)?.for_loss(&loss, &val_path)?;
            let spec = ModelSpec {
                kind: match model {
                    Model::Linear => ModelKind::Linear,
                    Model::Mlp => ModelKind::Mlp,
                },
                dimension: train_data.dimension(),
            };
            let mut cfg = TrainConfig::new(loss, lr, seed);
            cfg.epochs = epochs as usize;
            cfg.batch_size = batch_size as usize;
            let (params, hist) = train(spec, train_data.as_ref(), val_data.as_ref(), &cfg)?;
            log::info!(
                "trained {} for {} epochs: final train risk {:.6}, val risk {:.6}",
                loss.label(),
                cfg.epochs,
                hist.train_risk.last().copied().unwrap_or(f64::NAN),
                hist.val_risk.last().copied().unwrap_or(f64::NAN)
            );
            write_text(Some(&out), &to_json(&params)?)?;
            if let Some(path) = history {
                write_text(Some(&path), &to_json(&hist)?)?;
            }
            Ok(())
        }
        Command::Eval {
            model,
            data,
            out,
            predictions,
        } => {
            let text = fs::read_to_string(&model)
                .map_err(|e| usage(format!("cannot read {}: {e}", model.display())))?;
            let params: ModelParams = serde_json::from_str(&text).map_err(Error::Json)?;
            let test = Data::load(&data)?.labeled(&data)?;
            let report = evaluate(&params, &test)?;
            if let Some(path) = predictions {
                let preds = params.predict(&test)?;
                let rows = test
                    .rows()
                    .iter()
                    .zip(preds)
                    .map(|(r, p)| intreg::LabeledExample {
                        features: r.features.clone(),
                        target: p,
                    })
                    .collect();
                let out_ds = LabeledDataset::new(test.dimension(), rows)?;
                let file = fs::File::create(&path).map_err(Error::Io)?;
                write_labeled_csv_to(&out_ds, file)?;
            }
            write_text(out.as_deref(), &to_json(&report)?)
        }
        Command::Bench {
            config,
            out,
            csv,
            plot,
            jobs,
        } => {
            let cfg = load_config(&config)?;
            if plot.is_some() && cfg.fractions.is_none() {
                return Err(usage("--plot needs a config with `fractions`"));
            }
            let table = run_experiment(&cfg, jobs as usize)?;
            write_report(&table, &out)?;
            if let Some(path) = csv {
                write_report_csv(&table, &path)?;
            }
            if let Some(path) = plot {
                let sweep = fraction_sweep(&cfg, jobs as usize)?;
                write_plot_data(&sweep, &path)?;
            }
            let failed: Vec<&str> = table
                .cells
                .iter()
                .filter(|c| c.reason.is_some())
                .map(|c| c.method.as_str())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(runtime(
                    "cell-failed",
                    format!("{} cell(s) failed: {}", failed.len(), failed.join(", ")),
                ))
            }
        }
        Command::Sweep { config, out, jobs } => {
            let cfg = load_config(&config)?;
            if cfg.fractions.is_none() {
                return Err(usage("config has no `fractions`"));
            }
            let sweep = fraction_sweep(&cfg, jobs as usize)?;
            write_plot_data(&sweep, &out)?;
            Ok(())
        }
        Command::Validate {
            q,
            samples,
            seed,
            y_min,
            y_max,
            out,
        } => {
            let mut cfg = SuiteConfig::new(q, samples as usize, seed);
            cfg.y_min = y_min;
            cfg.y_max = y_max;
            let records = run_suite(&cfg)?;
            for r in records.iter().filter(|r| r.is_skipped()) {
                eprintln!(
                    "warning: {} skipped: {}",
                    r.test,
                    r.note.as_deref().unwrap_or("")
                );
            }
            write_text(out.as_deref(), &to_json(&records)?)?;
            let failed: Vec<&str> = records
                .iter()
                .filter(|r| !r.pass && !r.is_skipped())
                .map(|r| r.test.as_str())
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(runtime("validation-failed", failed.join(", ")))
            }
        }
        Command::Ambiguity { q, grid, out } => {
            let mut text = String::from("d,probability\n");
            for (d, p) in ambiguity_profile(q, grid as usize)? {
                text.push_str(&format!("{d},{p}\n"));
            }
            write_text(out.as_deref(), &text)
        }
    }
}

fn init_logging() -> Result<(), Failure> {
    let level = match std::env::var("INTREG_LOG").as_deref() {
        Err(_) | Ok("") => log::LevelFilter::Warn,
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok(other) => {
            return Err(usage(format!(
                "INTREG_LOG must be quiet, info or debug, got `{other}`"
            )))
        }
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "error: usage-error: {}",
                first.strip_prefix("error: ").unwrap_or(first)
            );
            return ExitCode::from(2);
        }
    };
    match init_logging().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.line);
            ExitCode::from(f.code)
        }
    }
}
