//! Adam and the mini-batch training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Supervision;
use crate::losses::{empirical_risk, loss_eval, LossSpec};
use crate::models::{init_params, ModelParams, ModelSpec, Workspace};
use crate::rng::RngHandle;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::shape(self.m.len(), params.len()));
        }
        if grads.len() != self.m.len() {
            return Err(Error::shape(self.m.len(), grads.len()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powf(self.t as f64);
        let c2 = 1.0 - self.beta2.powf(self.t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

fn default_batch_size() -> usize {
    512
}
fn default_epochs() -> usize {
    1000
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    pub loss: LossSpec,
    #[serde(default = "default_true")]
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn new(loss: LossSpec, learning_rate: f64, seed: u64) -> Self {
        TrainConfig {
            learning_rate,
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            seed,
            loss,
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !self.loss.is_differentiable() {
            return Err(Error::config(format!(
                "{} is evaluation-only and cannot be trained",
                self.loss.label()
            )));
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss over each epoch's batches, measured before each update.
    pub train_risk: Vec<f64>,
    /// Validation risk under the training loss after each epoch.
    pub val_risk: Vec<f64>,
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
    pub steps: u64,
}

/// Initializes from `cfg.seed` and trains. See [`train_from`].
pub fn train(
    spec: ModelSpec,
    train_data: &dyn Supervision,
    val_data: &dyn Supervision,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    let init = init_params(spec, &mut RngHandle::new(cfg.seed).child(0))?;
    train_from(init, train_data, val_data, cfg)
}

/// Mini-batch Adam from the given parameters.
///
/// Each epoch visits the training rows in an order drawn from
/// `child(1)` of `cfg.seed` (or in storage order when `shuffle` is off).
/// The last partial batch is kept; each batch gradient is the mean of the
/// per-example gradients.
pub fn train_from(
    mut params: ModelParams,
    train_data: &dyn Supervision,
    val_data: &dyn Supervision,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::InsufficientData("training and validation data must be nonempty".into()));
    }
    params.check_input(train_data.dimension())?;
    params.check_input(val_data.dimension())?;

    let n = train_data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = RngHandle::new(cfg.seed).child(1);
    let mut adam = AdamState::new(params.values().len());
    let mut ws = Workspace::new(params.spec());
    let mut grad = vec![0.0; params.values().len()];
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            shuffler.shuffle(&mut order);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let pred = ws.forward(&params, train_data.features(i));
                let loss = loss_eval(&cfg.loss, pred, train_data.label(i))?;
                epoch_loss += loss.value;
                ws.backward_into(&params, loss.grad * scale, &mut grad);
            }
            adam.step(params.values_mut(), &grad, cfg.learning_rate)?;
        }
        let train_risk = epoch_loss / n as f64;
        let val_risk = empirical_risk(&cfg.loss, &params, val_data)?;
        if !train_risk.is_finite() || !val_risk.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.train_risk.push(train_risk);
        history.val_risk.push(val_risk);
        history.epoch_seconds.push(started.elapsed().as_secs_f64());
    }
    history.steps = adam.steps();
    Ok((params, history))
}

/// A trained model competing in validation-based selection.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub config: TrainConfig,
    pub params: ModelParams,
}

/// Index of the candidate with the lowest validation risk under
/// `selection_loss`. Ties go to the smaller learning rate, then to the
/// earlier candidate. Non-finite risks rank last.
pub fn select_model(
    candidates: &[Candidate],
    val_data: &dyn Supervision,
    selection_loss: &LossSpec,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::config("model selection needs at least one candidate"));
    }
    let risks = candidates
        .iter()
        .map(|c| empirical_risk(selection_loss, &c.params, val_data))
        .collect::<Result<Vec<f64>>>()?;
    Ok(best_index(
        candidates.iter().map(|c| c.config.learning_rate).zip(risks),
    ))
}

/// Selection rule on `(learning_rate, risk)` pairs.
pub fn best_index(scored: impl IntoIterator<Item = (f64, f64)>) -> usize {
    let key = |r: f64| if r.is_finite() { r } else { f64::INFINITY };
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, (lr, risk)) in scored.into_iter().enumerate() {
        let risk = key(risk);
        let better = match best {
            None => true,
            Some((_, best_lr, best_risk)) => risk < best_risk || (risk == best_risk && lr < best_lr),
        };
        if better {
            best = Some((i, lr, risk));
        }
    }
    best.map(|b| b.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{synth_dataset, SynthKind};
    use crate::losses::BaseLossKind;

    const MSE: LossSpec = LossSpec::Supervised {
        base: BaseLossKind::Mse,
    };

    #[test]
    fn zero_gradient_keeps_params() {
        let mut adam = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 3.0];
        adam.step(&mut p, &[0.0; 3], 0.1).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.steps(), 1);
    }

    // At t = 1, m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
    #[test]
    fn first_step_has_learning_rate_magnitude() {
        for g in [1e-3, 0.5, -7.0, 1e4] {
            let mut adam = AdamState::new(1);
            let mut p = vec![0.0];
            adam.step(&mut p, &[g], 0.01).unwrap();
            let expected = -0.01 * g / (g.abs() + EPSILON);
            assert!((p[0] - expected).abs() < 1e-15, "g={g}: {}", p[0]);
            assert!((p[0].abs() - 0.01).abs() < 1e-6);
        }
    }

    #[test]
    fn length_mismatch() {
        let mut adam = AdamState::new(2);
        assert!(adam.step(&mut [0.0; 3], &[0.0; 3], 0.1).is_err());
        assert!(adam.step(&mut [0.0; 2], &[0.0; 1], 0.1).is_err());
    }

    #[test]
    fn single_epoch_single_batch_is_one_step() {
        let data = synth_dataset(SynthKind::Linear, 40, 2, 0.0, &mut RngHandle::new(1)).unwrap();
        let mut cfg = TrainConfig::new(MSE, 1e-2, 0);
        cfg.epochs = 1;
        cfg.batch_size = 64;
        let (_, hist) = train(ModelSpec::linear(2), &data, &data, &cfg).unwrap();
        assert_eq!(hist.steps, 1);
        assert_eq!(hist.train_risk.len(), 1);
        cfg.batch_size = 16;
        let (_, hist) = train(ModelSpec::linear(2), &data, &data, &cfg).unwrap();
        assert_eq!(hist.steps, 3);
    }

    #[test]
    fn training_is_deterministic() {
        let data = synth_dataset(SynthKind::Sinusoid, 100, 3, 0.1, &mut RngHandle::new(1)).unwrap();
        let mut cfg = TrainConfig::new(MSE, 1e-2, 5);
        cfg.epochs = 20;
        cfg.batch_size = 16;
        let (a, ha) = train(ModelSpec::mlp(3), &data, &data, &cfg).unwrap();
        let (b, hb) = train(ModelSpec::mlp(3), &data, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.train_risk, hb.train_risk);
    }

    #[test]
    fn indicator_cannot_train() {
        let cfg = TrainConfig::new(LossSpec::IndicatorLm, 1e-2, 0);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn divergence_reported() {
        let data = synth_dataset(SynthKind::Linear, 10, 1, 0.0, &mut RngHandle::new(1)).unwrap();
        let mut cfg = TrainConfig::new(MSE, 1e300, 0);
        cfg.epochs = 50;
        let init = ModelParams::from_values(ModelSpec::linear(1), vec![1e200, 0.0]).unwrap();
        assert!(matches!(
            train_from(init, &data, &data, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn selection_rules() {
        assert_eq!(best_index([(0.01, 1.0)]), 0);
        assert_eq!(best_index([(0.01, 2.0), (0.001, 1.0)]), 1);
        assert_eq!(best_index([(0.01, 1.0), (0.001, 1.0)]), 1);
        assert_eq!(best_index([(0.001, 1.0), (0.001, 1.0)]), 0);
        assert_eq!(best_index([(0.01, f64::NAN), (0.001, 5.0)]), 1);
    }

    #[test]
    fn select_model_prefers_lower_risk() {
        let data = synth_dataset(SynthKind::Linear, 30, 1, 0.0, &mut RngHandle::new(1)).unwrap();
        let good = ModelParams::from_values(ModelSpec::linear(1), vec![1.0, 0.5]).unwrap();
        let bad = ModelParams::from_values(ModelSpec::linear(1), vec![0.0, 0.0]).unwrap();
        let cands = vec![
            Candidate {
                config: TrainConfig::new(MSE, 1e-3, 0),
                params: bad,
            },
            Candidate {
                config: TrainConfig::new(MSE, 1e-2, 0),
                params: good.clone(),
            },
        ];
        assert_eq!(select_model(&cands, &data, &MSE).unwrap(), 1);
        assert!(select_model(&[], &data, &MSE).is_err());
        let tie = vec![
            Candidate {
                config: TrainConfig::new(MSE, 1e-2, 0),
                params: good.clone(),
            },
            Candidate {
                config: TrainConfig::new(MSE, 1e-3, 0),
                params: good,
            },
        ];
        assert_eq!(select_model(&tie, &data, &MSE).unwrap(), 1);
    }
}
