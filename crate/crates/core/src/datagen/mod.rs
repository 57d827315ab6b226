//! Interval-target generation.
//!
//! Given a true target `y` and a maximum size `q`, an interval is drawn
//! uniformly from every `[lower, upper]` with `lower <= y <= upper` and
//! `upper - lower <= q`. In the offsets `a = y - lower`, `b = upper - y` that
//! set is the triangle `a, b >= 0, a + b <= q` of area `q^2 / 2`.
//!
//! Two samplers produce this distribution:
//!
//! - [`sample_interval_direct`] maps a uniform point of the unit square onto
//!   the triangle by reflecting it across the anti-diagonal.
//! - [`sample_interval_rejection`] simulates an annotation loop: endpoints
//!   are proposed uniformly on `[y_min - q, y_max + q]`, candidate intervals
//!   (ordered, size at most `q`, meeting the label range) are shown to an
//!   annotator, and the first one containing `y` is kept.

pub mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalDataset, IntervalExample, LabeledDataset, LabeledExample};
use crate::rng::RngHandle;

/// Upper limit on endpoint proposals for a single rejection-sampled interval.
pub const MAX_PROPOSALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Direct,
    Rejection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Maximum interval size.
    pub q: f64,
    /// Clip endpoints into the dataset's label range after sampling. This
    /// changes the interval distribution near the range boundaries.
    #[serde(default)]
    pub clamp_to_label_range: bool,
    #[serde(default)]
    pub sampler: SamplerKind,
}

impl GenConfig {
    pub fn new(q: f64) -> Self {
        GenConfig {
            q,
            clamp_to_label_range: false,
            sampler: SamplerKind::Direct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_q(self.q)
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::config(format!("q must be a positive finite number, got {q}")));
    }
    Ok(())
}

/// Counters of the rejection annotation loop.
///
/// `proposals` counts raw endpoint pairs; `attempts` counts candidate
/// intervals put to the annotator; `accepted` counts intervals kept.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SamplerStats {
    pub proposals: u64,
    pub attempts: u64,
    pub accepted: u64,
    pub empirical_acceptance: f64,
}

impl SamplerStats {
    pub fn absorb(&mut self, other: &SamplerStats) {
        self.proposals += other.proposals;
        self.attempts += other.attempts;
        self.accepted += other.accepted;
        self.refresh();
    }

    fn refresh(&mut self) {
        self.empirical_acceptance = if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        };
    }
}

/// Exact draw from the uniform distribution over intervals that contain `y`
/// and have size at most `q`.
pub fn sample_interval_direct(y: f64, q: f64, rng: &mut RngHandle) -> Result<Interval> {
    check_q(q)?;
    let (mut u, mut v) = (rng.unit(), rng.unit());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    Interval::new(y - q * u, y + q * v)
}

/// One annotated interval from the rejection loop, with its counters.
pub fn sample_interval_rejection(
    y: f64,
    q: f64,
    y_min: f64,
    y_max: f64,
    rng: &mut RngHandle,
) -> Result<(Interval, SamplerStats)> {
    check_q(q)?;
    if !(y_min <= y_max) {
        return Err(Error::InvalidRange { lo: y_min, hi: y_max });
    }
    if !(y_min <= y && y <= y_max) {
        return Err(Error::InvalidLabel(format!(
            "label {y} outside label range [{y_min}, {y_max}]"
        )));
    }
    let (lo, hi) = (y_min - q, y_max + q);
    let mut stats = SamplerStats::default();
    while stats.proposals < MAX_PROPOSALS {
        let lower = rng.uniform(lo, hi)?;
        let upper = rng.uniform(lo, hi)?;
        stats.proposals += 1;
        let candidate = lower <= upper && upper - lower <= q && upper >= y_min && lower <= y_max;
        if !candidate {
            continue;
        }
        stats.attempts += 1;
        if lower <= y && y <= upper {
            stats.accepted = 1;
            stats.refresh();
            return Ok((Interval::new(lower, upper)?, stats));
        }
    }
    Err(Error::SamplerExhausted(MAX_PROPOSALS))
}

/// Probability that a candidate interval contains a given label,
/// `q / (2 (y_max - y_min) + q)`.
pub fn acceptance_rate_theoretical(q: f64, y_min: f64, y_max: f64) -> Result<f64> {
    check_q(q)?;
    if !(y_min <= y_max) {
        return Err(Error::InvalidRange { lo: y_min, hi: y_max });
    }
    Ok(q / (2.0 * (y_max - y_min) + q))
}

/// Probability that an interval sampled for `y` also contains a label at
/// distance `separation` from `y`: `((q - d) / q)^2` for `d <= q`, else 0.
pub fn containment_prob(separation: f64, q: f64) -> f64 {
    let d = separation.abs();
    if d >= q {
        0.0
    } else {
        let r = (q - d) / q;
        r * r
    }
}

/// Replace every label with a generated interval. The true targets are kept
/// in the dataset's hidden column.
pub fn make_interval_dataset(
    data: &LabeledDataset,
    cfg: &GenConfig,
    rng: &mut RngHandle,
) -> Result<(IntervalDataset, SamplerStats)> {
    cfg.validate()?;
    let range = data.label_range();
    let needs_range = cfg.sampler == SamplerKind::Rejection || cfg.clamp_to_label_range;
    if needs_range && range.is_none() {
        return Err(Error::config(
            "rejection sampling and clamping need a label range on the dataset",
        ));
    }
    let mut stats = SamplerStats::default();
    let mut rows = Vec::with_capacity(data.len());
    let mut hidden = Vec::with_capacity(data.len());
    for row in data.rows() {
        let y = row.target;
        let mut interval = match cfg.sampler {
            SamplerKind::Direct => {
                let s = sample_interval_direct(y, cfg.q, rng)?;
                stats.absorb(&SamplerStats {
                    proposals: 1,
                    attempts: 1,
                    accepted: 1,
                    empirical_acceptance: 1.0,
                });
                s
            }
            SamplerKind::Rejection => {
                let (y_min, y_max) = range.expect("checked above");
                let (s, st) = sample_interval_rejection(y, cfg.q, y_min, y_max, rng)?;
                stats.absorb(&st);
                s
            }
        };
        if cfg.clamp_to_label_range {
            let (y_min, y_max) = range.expect("checked above");
            interval = interval.clamp(y_min, y_max)?;
        }
        rows.push(IntervalExample {
            features: row.features.clone(),
            interval,
        });
        hidden.push(y);
    }
    IntervalDataset::new(data.dimension(), rows, Some(hidden))?.with_label_range(range)
        .map(|ds| (ds, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Linear,
    Sinusoid,
}

/// Intercept of the synthetic linear target.
pub const LINEAR_BIAS: f64 = 0.5;

/// Weights of the synthetic linear target: `w_j = (-1)^j (j + 1) / d`.
pub fn linear_weights(dimension: usize) -> Vec<f64> {
    (0..dimension)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (j + 1) as f64 / dimension as f64
        })
        .collect()
}

/// Weights of the synthetic sinusoid target: `w_j = 1 / (2d)`, so `w.x`
/// spans one period over the feature cube.
pub fn sinusoid_weights(dimension: usize) -> Vec<f64> {
    vec![1.0 / (2.0 * dimension as f64); dimension]
}

/// Synthetic regression data with features uniform on `[-1, 1]^d`.
///
/// - linear: `y = w.x + 0.5` with [`linear_weights`]
/// - sinusoid: `y = sin(2 pi w.x)` with [`sinusoid_weights`]
///
/// plus Gaussian noise with standard deviation `noise_sd`.
pub fn synth_dataset(
    kind: SynthKind,
    n: usize,
    dimension: usize,
    noise_sd: f64,
    rng: &mut RngHandle,
) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InsufficientData("synthetic dataset needs n > 0".into()));
    }
    if dimension == 0 {
        return Err(Error::config("synthetic dataset needs dimension >= 1"));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::config(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let weights = match kind {
        SynthKind::Linear => linear_weights(dimension),
        SynthKind::Sinusoid => sinusoid_weights(dimension),
    };
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let features: Vec<f64> = (0..dimension)
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect::<Result<_>>()?;
        let dot: f64 = weights.iter().zip(&features).map(|(w, x)| w * x).sum();
        let clean = match kind {
            SynthKind::Linear => dot + LINEAR_BIAS,
            SynthKind::Sinusoid => (2.0 * std::f64::consts::PI * dot).sin(),
        };
        let target = if noise_sd > 0.0 {
            clean + noise_sd * rng.normal()
        } else {
            clean
        };
        rows.push(LabeledExample { features, target });
    }
    LabeledDataset::new(dimension, rows)
}
