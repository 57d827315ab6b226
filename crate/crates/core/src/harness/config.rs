//! JSON experiment schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{synth_dataset, SamplerKind, SynthKind};
use crate::error::{Error, Result};
use crate::interval::LabeledDataset;
use crate::io::load_labeled_csv;
use crate::losses::LossSpec;
use crate::models::ModelKind;
use crate::rng::RngHandle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    pub dimension: usize,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Labeled CSV; a relative path is resolved against the config file's
    /// directory.
    Csv(PathBuf),
    Synth(SynthSpec),
}

/// What the validation split is scored against when choosing a learning rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// The method's own training loss on validation intervals.
    #[default]
    Weak,
    /// MSE against the hidden validation targets. For oracle studies only.
    TrueLabels,
}

fn default_repeats() -> usize {
    5
}
fn default_learning_rates() -> Vec<f64> {
    vec![1e-2, 1e-3]
}
fn default_epochs() -> usize {
    1000
}
fn default_batch_size() -> usize {
    512
}
fn default_true() -> bool {
    true
}
fn default_split() -> [f64; 3] {
    [0.6, 0.2, 0.2]
}
fn default_sweep_method() -> LossSpec {
    LossSpec::SurrogateLm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub dataset: DatasetSource,
    pub q_values: Vec<f64>,
    pub methods: Vec<LossSpec>,
    pub model: ModelKind,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_learning_rates")]
    pub learning_rates: Vec<f64>,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub clamp_to_label_range: bool,
    #[serde(default = "default_true")]
    pub standardize_features: bool,
    #[serde(default)]
    pub validation: ValidationMode,
    #[serde(default = "default_split")]
    pub split_ratios: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(default = "default_sweep_method")]
    pub sweep_method: LossSpec,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(dataset: DatasetSource, q_values: Vec<f64>, methods: Vec<LossSpec>, model: ModelKind) -> Self {
        ExperimentConfig {
            name: String::new(),
            dataset,
            q_values,
            methods,
            model,
            repeats: default_repeats(),
            learning_rates: default_learning_rates(),
            seed_base: 0,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            shuffle: true,
            sampler: SamplerKind::default(),
            clamp_to_label_range: false,
            standardize_features: true,
            validation: ValidationMode::default(),
            split_ratios: default_split(),
            fractions: None,
            sweep_method: default_sweep_method(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving a relative CSV path
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        if let DatasetSource::Csv(csv) = &mut cfg.dataset {
            if csv.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new(""));
                *csv = base.join(&*csv);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::config("repeats must be >= 1"));
        }
        if self.q_values.is_empty() {
            return Err(Error::config("q_values must not be empty"));
        }
        if let Some(q) = self.q_values.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
            return Err(Error::config(format!("q values must be positive, got {q}")));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods must not be empty"));
        }
        for m in self.methods.iter().chain(std::iter::once(&self.sweep_method)) {
            m.validate()?;
            if !m.is_differentiable() {
                return Err(Error::config(format!("{} cannot be trained", m.label())));
            }
        }
        if self.learning_rates.is_empty() {
            return Err(Error::config("learning_rates must not be empty"));
        }
        if let Some(lr) = self.learning_rates.iter().find(|lr| !(lr.is_finite() && **lr > 0.0)) {
            return Err(Error::config(format!("learning rates must be positive, got {lr}")));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be >= 1"));
        }
        let [a, b, c] = self.split_ratios;
        if [a, b, c].iter().any(|r| !(*r > 0.0)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "split_ratios must be positive and sum to 1, got [{a}, {b}, {c}]"
            )));
        }
        if let Some(fr) = &self.fractions {
            if fr.is_empty() {
                return Err(Error::config("fractions must not be empty when present"));
            }
            if let Some(f) = fr.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
                return Err(Error::config(format!("fractions must lie in (0, 1], got {f}")));
            }
            if fr.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::config("fractions must be strictly increasing"));
            }
        }
        if let DatasetSource::Synth(s) = &self.dataset {
            if s.dimension == 0 {
                return Err(Error::config("synthetic dimension must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<LabeledDataset> {
        match &self.dataset {
            DatasetSource::Csv(path) => load_labeled_csv(path),
            DatasetSource::Synth(s) => synth_dataset(
                s.kind,
                s.n,
                s.dimension,
                s.noise_sd,
                &mut RngHandle::new(s.seed),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{BaseLossKind, SelectionStrategy};

    const EXAMPLE: &str = r#"{
        "name": "demo",
        "dataset": {"synth": {"kind": "linear", "n": 50, "dimension": 3}},
        "q_values": [2.0, 4.0],
        "methods": [
            {"kind": "surrogate_lm"},
            {"kind": "selection", "strategy": "middlemost", "base": {"huber": {"delta": 5.0}}}
        ],
        "model": "linear",
        "fractions": [0.5, 1.0]
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(EXAMPLE).unwrap();
        assert_eq!(cfg.repeats, 5);
        assert_eq!(cfg.learning_rates, vec![1e-2, 1e-3]);
        assert_eq!(cfg.split_ratios, [0.6, 0.2, 0.2]);
        assert_eq!(cfg.validation, ValidationMode::Weak);
        assert_eq!(
            cfg.methods[1],
            LossSpec::Selection {
                strategy: SelectionStrategy::Middlemost,
                base: BaseLossKind::Huber { delta: 5.0 }
            }
        );
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |from: &str, to: &str| {
            let text = EXAMPLE.replace(from, to);
            assert!(ExperimentConfig::from_json(&text).is_err(), "{to}");
        };
        bad(r#""q_values": [2.0, 4.0]"#, r#""q_values": [0.0]"#);
        bad(r#""fractions": [0.5, 1.0]"#, r#""fractions": [0.0, 1.0]"#);
        bad(r#""fractions": [0.5, 1.0]"#, r#""fractions": [1.0, 0.5]"#);
        bad(r#""model": "linear""#, r#""model": "linear", "repeats": 0"#);
        bad(r#""model": "linear""#, r#""model": "linear", "unknown_key": 1"#);
        bad(r#""model": "linear""#, r#""model": "cnn""#);
        bad(r#"{"kind": "surrogate_lm"}"#, r#"{"kind": "indicator_lm"}"#);
    }

    #[test]
    fn relative_csv_path_resolves_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let text = EXAMPLE.replace(
            r#"{"synth": {"kind": "linear", "n": 50, "dimension": 3}}"#,
            r#"{"csv": "data/x.csv"}"#,
        );
        let path = dir.path().join("exp.json");
        fs::write(&path, text).unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset, DatasetSource::Csv(dir.path().join("data/x.csv")));
    }
}
