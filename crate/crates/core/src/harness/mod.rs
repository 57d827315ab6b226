//! Repeated train/validation/test experiments over methods and interval sizes.
//!
//! Seeds: repeat `r` runs under `seed_base + r`. From that seed,
//! `derive_seed(seed, 1)` drives the split, `derive_seed(seed, 2)` the
//! interval generation, `derive_seed(seed, 3)` model initialization and batch
//! order, and `derive_seed(seed, 4)` the fraction-sweep permutation. Changing
//! q or the method list therefore leaves the split and the initial weights
//! untouched.

pub mod config;
pub mod report;

use rayon::prelude::*;

use crate::datagen::{make_interval_dataset, GenConfig};
use crate::error::{Error, Result};
use crate::interval::{IntervalDataset, LabeledDataset, Supervision};
use crate::losses::{empirical_risk, BaseLossKind, LossSpec};
use crate::metrics::{evaluate, mse};
use crate::models::{ModelParams, ModelSpec};
use crate::optim::{best_index, train, TrainConfig};
use crate::rng::{derive_seed, RngHandle};

pub use config::{DatasetSource, ExperimentConfig, SynthSpec, ValidationMode};
pub use report::{
    write_plot_data, write_report, write_report_csv, CellStatus, CellSummary, MetricSummary,
    ResultCell, ResultTable, RunRecord, SweepPoint,
};

const SPLIT_STREAM: u64 = 1;
const GEN_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;
const FRACTION_STREAM: u64 = 4;

/// Smallest dataset [`split`] accepts.
pub const MIN_SPLIT_SIZE: usize = 5;

/// Random partition into train, validation and test. Validation and test get
/// `floor(n * ratio)` rows; train gets the rest.
pub fn split(
    data: &LabeledDataset,
    ratios: [f64; 3],
    rng: &mut RngHandle,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    let n = data.len();
    if n < MIN_SPLIT_SIZE {
        return Err(Error::InsufficientData(format!(
            "split needs at least {MIN_SPLIT_SIZE} rows, got {n}"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    let portion = |r: f64| (n as f64 * r + 1e-9).floor() as usize;
    let n_val = portion(ratios[1]);
    let n_test = portion(ratios[2]);
    let n_train = n - n_val - n_test;
    let perm = rng.permutation(n);
    Ok((
        data.subset(&perm[..n_train]),
        data.subset(&perm[n_train..n_train + n_val]),
        data.subset(&perm[n_train + n_val..]),
    ))
}

/// Per-feature mean and standard deviation of a reference dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Population statistics of `data`; constant features get scale 1.
    pub fn fit(data: &LabeledDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InsufficientData("cannot standardize an empty dataset".into()));
        }
        let d = data.dimension();
        let n = data.len() as f64;
        let mut means = vec![0.0; d];
        for row in data.rows() {
            for (m, x) in means.iter_mut().zip(&row.features) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut scales = vec![0.0; d];
        for row in data.rows() {
            for ((s, x), m) in scales.iter_mut().zip(&row.features).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) {
                *s = 1.0;
            }
        }
        Ok(Standardizer { means, scales })
    }

    pub fn apply(&self, data: &LabeledDataset) -> LabeledDataset {
        data.map_features(|x| {
            for ((v, m), s) in x.iter_mut().zip(&self.means).zip(&self.scales) {
                *v = (*v - m) / s;
            }
        })
    }
}

/// Labeled splits of one repeat. The test split never receives intervals.
struct Prepared {
    seed: u64,
    train: LabeledDataset,
    val: LabeledDataset,
    test: LabeledDataset,
}

fn prepare(cfg: &ExperimentConfig, data: &LabeledDataset, repeat: usize) -> Result<Prepared> {
    let seed = cfg.seed_base.wrapping_add(repeat as u64);
    let (train, val, test) = split(
        data,
        cfg.split_ratios,
        &mut RngHandle::new(derive_seed(seed, SPLIT_STREAM)),
    )?;
    let (train, val, test) = if cfg.standardize_features {
        let z = Standardizer::fit(&train)?;
        (z.apply(&train), z.apply(&val), z.apply(&test))
    } else {
        (train, val, test)
    };
    Ok(Prepared {
        seed,
        train,
        val,
        test,
    })
}

/// Interval-labeled train and validation splits at size bound `q`.
fn weak_splits(cfg: &ExperimentConfig, p: &Prepared, q: f64) -> Result<(IntervalDataset, IntervalDataset)> {
    let gen = GenConfig {
        q,
        clamp_to_label_range: cfg.clamp_to_label_range,
        sampler: cfg.sampler,
    };
    let root = RngHandle::new(derive_seed(p.seed, GEN_STREAM));
    let (train, _) = make_interval_dataset(&p.train, &gen, &mut root.child(0))?;
    let (val, _) = make_interval_dataset(&p.val, &gen, &mut root.child(1))?;
    Ok((train, val))
}

/// Training inputs of one run. Supervised losses read the labeled splits,
/// all others the interval splits.
struct RunData<'a> {
    train_labeled: &'a LabeledDataset,
    train_weak: &'a IntervalDataset,
    val_labeled: &'a LabeledDataset,
    val_weak: &'a IntervalDataset,
}

/// Trains one model per learning rate and keeps the best by validation score.
fn fit_and_select(
    cfg: &ExperimentConfig,
    spec: ModelSpec,
    loss: LossSpec,
    seed: u64,
    data: &RunData<'_>,
) -> Result<(f64, f64, ModelParams)> {
    let (train_data, val_data): (&dyn Supervision, &dyn Supervision) = if loss.needs_exact_labels() {
        (data.train_labeled, data.val_labeled)
    } else {
        (data.train_weak, data.val_weak)
    };
    let mut fitted = Vec::new();
    let mut first_error = None;
    for &lr in &cfg.learning_rates {
        let tc = TrainConfig {
            learning_rate: lr,
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            seed: derive_seed(seed, TRAIN_STREAM),
            loss,
            shuffle: cfg.shuffle,
        };
        let scored = train(spec, train_data, val_data, &tc).and_then(|(params, _)| {
            let score = match cfg.validation {
                ValidationMode::Weak => empirical_risk(&loss, &params, val_data)?,
                ValidationMode::TrueLabels => empirical_risk(
                    &LossSpec::Supervised {
                        base: BaseLossKind::Mse,
                    },
                    &params,
                    data.val_labeled,
                )?,
            };
            Ok((lr, score, params))
        });
        match scored {
            Ok(f) => fitted.push(f),
            Err(e) => {
                log::debug!("{} lr={lr}: {e}", loss.label());
                first_error.get_or_insert(e);
            }
        }
    }
    if fitted.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::config("no learning rates")));
    }
    let best = best_index(fitted.iter().map(|f| (f.0, f.1)));
    Ok(fitted.swap_remove(best))
}

fn run_one(
    cfg: &ExperimentConfig,
    spec: ModelSpec,
    loss: LossSpec,
    repeat: usize,
    p: &Prepared,
    train_weak: &IntervalDataset,
    val_weak: &IntervalDataset,
) -> Result<RunRecord> {
    let data = RunData {
        train_labeled: &p.train,
        train_weak,
        val_labeled: &p.val,
        val_weak,
    };
    let (learning_rate, val_score, params) = fit_and_select(cfg, spec, loss, p.seed, &data)?;
    Ok(RunRecord {
        repeat,
        seed: p.seed,
        learning_rate,
        val_score,
        metrics: evaluate(&params, &p.test)?,
    })
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

type WeakSplits = std::result::Result<(IntervalDataset, IntervalDataset), String>;

struct Setup {
    spec: ModelSpec,
    prepared: Vec<Prepared>,
    /// Indexed `[q][repeat]`.
    weak: Vec<Vec<WeakSplits>>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let data = cfg.load_dataset()?;
    let spec = ModelSpec {
        kind: cfg.model,
        dimension: data.dimension(),
    };
    spec.validate()?;
    let prepared = (0..cfg.repeats)
        .map(|r| prepare(cfg, &data, r))
        .collect::<Result<Vec<_>>>()?;
    let weak = cfg
        .q_values
        .iter()
        .map(|&q| {
            prepared
                .iter()
                .map(|p| weak_splits(cfg, p, q).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    Ok(Setup { spec, prepared, weak })
}

/// Runs every (q, method, repeat) combination and aggregates test metrics.
///
/// Independent runs execute on `jobs` threads; results are reduced in index
/// order so the table does not depend on `jobs`. A failing run marks its
/// cell failed and the experiment continues.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ResultTable> {
    let s = setup(cfg)?;
    let mut tasks = Vec::new();
    for qi in 0..cfg.q_values.len() {
        for mi in 0..cfg.methods.len() {
            for r in 0..cfg.repeats {
                tasks.push((qi, mi, r));
            }
        }
    }
    let outcomes: Vec<std::result::Result<RunRecord, String>> = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(qi, mi, r)| {
                let (train_weak, val_weak) = s.weak[qi][r].as_ref().map_err(Clone::clone)?;
                run_one(cfg, s.spec, cfg.methods[mi], r, &s.prepared[r], train_weak, val_weak)
                    .map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut cells = Vec::new();
    let mut outcomes = outcomes.into_iter();
    for &q in &cfg.q_values {
        for &loss in &cfg.methods {
            let mut runs = Vec::new();
            let mut failure = None;
            for r in 0..cfg.repeats {
                match outcomes.next().expect("one outcome per task") {
                    Ok(run) => runs.push(run),
                    Err(e) => {
                        failure.get_or_insert(format!("repeat {r}: {e}"));
                    }
                }
            }
            let cell = ResultCell::new(loss, q, runs, failure);
            match (&cell.summary, &cell.reason) {
                (_, Some(reason)) => log::warn!("{} q={q}: failed ({reason})", cell.method),
                (Some(s), None) => log::info!(
                    "{} q={q}: mse {:.4} ({:.4})",
                    cell.method,
                    s.mse.mean,
                    s.mse.std
                ),
                (None, None) => {}
            }
            cells.push(cell);
        }
    }
    Ok(ResultTable {
        name: cfg.name.clone(),
        repeats: cfg.repeats,
        cells,
    })
}

/// Rows kept at `fraction` of an `n`-row training split.
pub fn fraction_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let k = (n as f64 * fraction + 1e-9).floor() as usize;
    if k == 0 {
        return Err(Error::InsufficientData(format!(
            "fraction {fraction} of {n} training rows leaves no examples"
        )));
    }
    Ok(k.min(n))
}

/// Test MSE of `cfg.sweep_method` trained on growing prefixes of a fixed
/// shuffle of each repeat's training split. The kept rows stay in their
/// original order, so fraction 1.0 reproduces [`run_experiment`] exactly and
/// larger fractions are supersets of smaller ones.
pub fn fraction_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepPoint>> {
    let fractions = cfg
        .fractions
        .clone()
        .ok_or_else(|| Error::config("fraction sweep needs a `fractions` list"))?;
    let s = setup(cfg)?;
    let subsets: Vec<Vec<Vec<usize>>> = s
        .prepared
        .iter()
        .map(|p| {
            let n = p.train.len();
            let perm = RngHandle::new(derive_seed(p.seed, FRACTION_STREAM)).permutation(n);
            fractions
                .iter()
                .map(|&f| {
                    let mut kept = perm[..fraction_size(n, f)?].to_vec();
                    kept.sort_unstable();
                    Ok(kept)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut tasks = Vec::new();
    for qi in 0..cfg.q_values.len() {
        for fi in 0..fractions.len() {
            for r in 0..cfg.repeats {
                tasks.push((qi, fi, r));
            }
        }
    }
    let outcomes: Vec<Result<f64>> = pool(jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(qi, fi, r)| {
                let (train_weak, val_weak) = s.weak[qi][r]
                    .as_ref()
                    .map_err(|e| Error::config(e.clone()))?;
                let p = &s.prepared[r];
                let kept = &subsets[r][fi];
                let train_labeled = p.train.subset(kept);
                let train_weak = train_weak.subset(kept);
                let data = RunData {
                    train_labeled: &train_labeled,
                    train_weak: &train_weak,
                    val_labeled: &p.val,
                    val_weak,
                };
                let (_, _, params) = fit_and_select(cfg, s.spec, cfg.sweep_method, p.seed, &data)?;
                mse(&params.predict(&p.test)?, &p.test.targets())
            })
            .collect()
    });

    let mut outcomes = outcomes.into_iter();
    let mut points = Vec::new();
    for &q in &cfg.q_values {
        for (fi, &fraction) in fractions.iter().enumerate() {
            let per_repeat = (0..cfg.repeats)
                .map(|_| outcomes.next().expect("one outcome per task"))
                .collect::<Result<Vec<f64>>>()?;
            let summary = MetricSummary::of(&per_repeat).expect("repeats >= 1");
            log::info!("sweep q={q} fraction={fraction}: mse {:.4}", summary.mean);
            points.push(SweepPoint {
                q,
                fraction,
                train_size: subsets[0][fi].len(),
                mean_mse: summary.mean,
                std_mse: summary.std,
                per_repeat,
            });
        }
    }
    Ok(points)
}
