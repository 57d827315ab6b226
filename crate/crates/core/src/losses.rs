//! Training objectives for interval targets.
//!
//! Every loss is a function of a scalar prediction and a label, returned
//! together with its derivative in the prediction. Non-smooth points take
//! the subgradient 0 (the kink of the absolute error, both hinge corners of
//! the surrogate limiting loss).
//!
//! | spec | value |
//! |------|-------|
//! | `supervised(l)` | `l(f, y)` |
//! | `selection(s, l)` | `l(f, pick_s(S))` with `pick` = lower, upper or midpoint |
//! | `avgl(l)` | `(l(f, lower) + l(f, upper)) / 2` |
//! | `indicator_lm` | `0` if `lower <= f <= upper`, else `1` |
//! | `surrogate_lm` | `max(0, lower - f) + max(0, f - upper)` |

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, Supervision, WeakLabel};
use crate::models::{ModelParams, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseLossKind {
    Mse,
    Mae,
    Huber { delta: f64 },
}

impl BaseLossKind {
    pub fn label(&self) -> String {
        match self {
            BaseLossKind::Mse => "mse".into(),
            BaseLossKind::Mae => "mae".into(),
            BaseLossKind::Huber { delta } => format!("huber({delta})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Leftmost,
    Rightmost,
    Middlemost,
}

impl SelectionStrategy {
    pub const ALL: [SelectionStrategy; 3] = [
        SelectionStrategy::Leftmost,
        SelectionStrategy::Rightmost,
        SelectionStrategy::Middlemost,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::Leftmost => "leftmost",
            SelectionStrategy::Rightmost => "rightmost",
            SelectionStrategy::Middlemost => "middlemost",
        }
    }
}

/// Training objective. Serialized as a tagged record, for example
/// `{"kind":"selection","strategy":"middlemost","base":"mse"}` or
/// `{"kind":"avgl","base":{"huber":{"delta":1.0}}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    Supervised {
        base: BaseLossKind,
    },
    Selection {
        strategy: SelectionStrategy,
        base: BaseLossKind,
    },
    Avgl {
        base: BaseLossKind,
    },
    IndicatorLm,
    SurrogateLm,
}

impl LossSpec {
    /// Short stable name used as a row key in reports.
    pub fn label(&self) -> String {
        match self {
            LossSpec::Supervised { base } => format!("supervised:{}", base.label()),
            LossSpec::Selection { strategy, base } => {
                format!("{}:{}", strategy.name(), base.label())
            }
            LossSpec::Avgl { base } => format!("avgl:{}", base.label()),
            LossSpec::IndicatorLm => "indicator_lm".into(),
            LossSpec::SurrogateLm => "surrogate_lm".into(),
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, LossSpec::IndicatorLm)
    }

    pub fn needs_exact_labels(&self) -> bool {
        matches!(self, LossSpec::Supervised { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let base = match self {
            LossSpec::Supervised { base }
            | LossSpec::Selection { base, .. }
            | LossSpec::Avgl { base } => base,
            LossSpec::IndicatorLm | LossSpec::SurrogateLm => return Ok(()),
        };
        if let BaseLossKind::Huber { delta } = base {
            if !(*delta > 0.0) {
                return Err(Error::config(format!("huber delta must be positive, got {delta}")));
            }
        }
        Ok(())
    }
}

impl FromStr for BaseLossKind {
    type Err = Error;

    /// Parses `mse`, `mae` or `huber(<delta>)`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(BaseLossKind::Mse),
            "mae" => Ok(BaseLossKind::Mae),
            _ => {
                let delta = s
                    .strip_prefix("huber(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or_else(|| Error::config(format!("unknown base loss `{s}`")))?;
                Ok(BaseLossKind::Huber { delta })
            }
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    /// Inverse of [`LossSpec::label`].
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.split_once(':') {
            None => match s {
                "surrogate_lm" => LossSpec::SurrogateLm,
                "indicator_lm" => LossSpec::IndicatorLm,
                _ => return Err(Error::config(format!("unknown loss `{s}`"))),
            },
            Some((head, base)) => {
                let base: BaseLossKind = base.parse()?;
                match head {
                    "supervised" => LossSpec::Supervised { base },
                    "avgl" => LossSpec::Avgl { base },
                    _ => {
                        let strategy = SelectionStrategy::ALL
                            .into_iter()
                            .find(|st| st.name() == head)
                            .ok_or_else(|| Error::config(format!("unknown loss `{s}`")))?;
                        LossSpec::Selection { strategy, base }
                    }
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[inline]
fn sign0(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn base_loss(kind: BaseLossKind, pred: f64, target: f64) -> f64 {
    let e = pred - target;
    match kind {
        BaseLossKind::Mse => e * e,
        BaseLossKind::Mae => e.abs(),
        BaseLossKind::Huber { delta } => {
            if e.abs() <= delta {
                0.5 * e * e
            } else {
                delta * (e.abs() - 0.5 * delta)
            }
        }
    }
}

#[inline]
pub fn base_loss_grad(kind: BaseLossKind, pred: f64, target: f64) -> f64 {
    let e = pred - target;
    match kind {
        BaseLossKind::Mse => 2.0 * e,
        BaseLossKind::Mae => sign0(e),
        BaseLossKind::Huber { delta } => {
            if e.abs() <= delta {
                e
            } else {
                delta * sign0(e)
            }
        }
    }
}

#[inline]
pub fn selection_target(strategy: SelectionStrategy, interval: &Interval) -> f64 {
    match strategy {
        SelectionStrategy::Leftmost => interval.lower(),
        SelectionStrategy::Rightmost => interval.upper(),
        SelectionStrategy::Middlemost => interval.midpoint(),
    }
}

#[inline]
pub fn avgl_loss(base: BaseLossKind, pred: f64, interval: &Interval) -> f64 {
    0.5 * base_loss(base, pred, interval.lower()) + 0.5 * base_loss(base, pred, interval.upper())
}

#[inline]
pub fn avgl_grad(base: BaseLossKind, pred: f64, interval: &Interval) -> f64 {
    0.5 * base_loss_grad(base, pred, interval.lower())
        + 0.5 * base_loss_grad(base, pred, interval.upper())
}

/// 0 inside the closed interval, 1 outside.
#[inline]
pub fn indicator_lm(pred: f64, interval: &Interval) -> f64 {
    if interval.contains(pred) {
        0.0
    } else {
        1.0
    }
}

#[inline]
pub fn surrogate_lm(pred: f64, interval: &Interval) -> f64 {
    (interval.lower() - pred).max(0.0) + (pred - interval.upper()).max(0.0)
}

#[inline]
pub fn surrogate_lm_grad(pred: f64, interval: &Interval) -> f64 {
    if pred < interval.lower() {
        -1.0
    } else if pred > interval.upper() {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: f64,
    /// False for the indicator loss, whose `grad` is reported as 0.
    pub differentiable: bool,
}

/// Evaluates `spec` at `pred` against `label`.
pub fn loss_eval(spec: &LossSpec, pred: f64, label: WeakLabel) -> Result<LossValue> {
    let smooth = |value, grad| LossValue {
        value,
        grad,
        differentiable: true,
    };
    match (spec, label) {
        (LossSpec::Supervised { base }, WeakLabel::Exact(y)) => {
            Ok(smooth(base_loss(*base, pred, y), base_loss_grad(*base, pred, y)))
        }
        (LossSpec::Supervised { .. }, WeakLabel::Interval(_)) => Err(Error::TypeMismatch(
            "supervised loss needs exact labels, got an interval".into(),
        )),
        (_, WeakLabel::Exact(_)) => Err(Error::TypeMismatch(format!(
            "{} needs interval labels, got an exact label",
            spec.label()
        ))),
        (LossSpec::Selection { strategy, base }, WeakLabel::Interval(s)) => {
            let t = selection_target(*strategy, &s);
            Ok(smooth(base_loss(*base, pred, t), base_loss_grad(*base, pred, t)))
        }
        (LossSpec::Avgl { base }, WeakLabel::Interval(s)) => {
            Ok(smooth(avgl_loss(*base, pred, &s), avgl_grad(*base, pred, &s)))
        }
        (LossSpec::SurrogateLm, WeakLabel::Interval(s)) => {
            Ok(smooth(surrogate_lm(pred, &s), surrogate_lm_grad(pred, &s)))
        }
        (LossSpec::IndicatorLm, WeakLabel::Interval(s)) => Ok(LossValue {
            value: indicator_lm(pred, &s),
            grad: 0.0,
            differentiable: false,
        }),
    }
}

/// Mean loss of `model` over `data`.
pub fn empirical_risk(spec: &LossSpec, model: &ModelParams, data: &dyn Supervision) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empirical risk of an empty dataset".into()));
    }
    model.check_input(data.dimension())?;
    let mut ws = Workspace::new(model.spec());
    let mut total = 0.0;
    for i in 0..data.len() {
        let pred = ws.forward(model, data.features(i));
        total += loss_eval(spec, pred, data.label(i))?.value;
    }
    Ok(total / data.len() as f64)
}

/// Worst-case and expected absolute error of a selection strategy on an
/// interval of size `a` whose true target is uniform inside it.
pub fn strategy_error_analytics(strategy: SelectionStrategy, a: f64) -> (f64, f64) {
    debug_assert!(a >= 0.0);
    match strategy {
        SelectionStrategy::Leftmost | SelectionStrategy::Rightmost => (a, a / 2.0),
        SelectionStrategy::Middlemost => (a / 2.0, a / 4.0),
    }
}
