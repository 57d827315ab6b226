//! Test-set metrics computed against true targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::LabeledDataset;
use crate::models::ModelParams;

/// Floor applied to each absolute error before taking logs in
/// [`geometric_mean_error`].
pub const GM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub mae: f64,
    pub gm: f64,
    /// `None` when either side has zero variance.
    pub pearson: Option<f64>,
}

fn check_lengths(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::shape(targets.len(), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::InsufficientData("metrics of an empty prediction set".into()));
    }
    Ok(())
}

pub fn mse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    let sum: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(sum / preds.len() as f64)
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    let sum: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p).abs()).sum();
    Ok(sum / preds.len() as f64)
}

/// `exp(mean(log(max(|y - p|, epsilon))))`.
pub fn geometric_mean_error(preds: &[f64], targets: &[f64], epsilon: f64) -> Result<f64> {
    check_lengths(preds, targets)?;
    let logs: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, y)| (y - p).abs().max(epsilon).ln())
        .sum();
    Ok((logs / preds.len() as f64).exp())
}

/// Sample Pearson correlation.
pub fn pearson(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_lengths(preds, targets)?;
    let n = preds.len() as f64;
    let mp = preds.iter().sum::<f64>() / n;
    let my = targets.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, y) in preds.iter().zip(targets) {
        let (dp, dy) = (p - mp, y - my);
        sxy += dp * dy;
        sxx += dp * dp;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::UndefinedCorrelation("predictions have zero variance"));
    }
    if syy == 0.0 {
        return Err(Error::UndefinedCorrelation("targets have zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks (ties share the mean rank), 1-based.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs, ys)?;
    pearson(&ranks(xs), &ranks(ys))
}

pub fn report(preds: &[f64], targets: &[f64]) -> Result<MetricReport> {
    Ok(MetricReport {
        mse: mse(preds, targets)?,
        mae: mae(preds, targets)?,
        gm: geometric_mean_error(preds, targets, GM_EPSILON)?,
        pearson: match pearson(preds, targets) {
            Ok(r) => Some(r),
            Err(Error::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        },
    })
}

/// All metrics from one prediction pass over `test`.
pub fn evaluate(model: &ModelParams, test: &LabeledDataset) -> Result<MetricReport> {
    let preds = model.predict(test)?;
    report(&preds, &test.targets())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::LabeledExample;
    use crate::models::ModelSpec;

    #[test]
    fn perfect_and_shifted() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert_eq!(mae(&y, &y).unwrap(), 0.0);
        let p: Vec<f64> = y.iter().map(|v| v + 2.0).collect();
        assert_eq!(mse(&p, &y).unwrap(), 4.0);
        assert_eq!(mae(&p, &y).unwrap(), 2.0);
        assert_eq!(mse(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(mae(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn geometric_mean_cases() {
        let z = [0.0, 0.0];
        assert!((geometric_mean_error(&[1.0, 4.0], &z, GM_EPSILON).unwrap() - 2.0).abs() < 1e-12);
        let z3 = [0.0; 3];
        assert!((geometric_mean_error(&[1.0, 2.0, 4.0], &z3, GM_EPSILON).unwrap() - 2.0).abs() < 1e-12);
        let gm = geometric_mean_error(&[0.0, 1.0], &z, GM_EPSILON).unwrap();
        assert!(gm > 0.0 && (gm - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn pearson_cases() {
        let y = [1.0, 2.0, 4.0, 7.0];
        let affine: Vec<f64> = y.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&affine, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((pearson(&neg, &y).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pearson(&[3.0; 4], &y),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn length_errors() {
        assert!(matches!(mse(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(matches!(mae(&[], &[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn spearman_with_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[9.0, 4.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    fn dataset(xs: &[f64], ys: &[f64]) -> LabeledDataset {
        let rows = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| LabeledExample {
                features: vec![x],
                target: y,
            })
            .collect();
        LabeledDataset::new(1, rows).unwrap()
    }

    #[test]
    fn evaluate_perfect_model() {
        let model = ModelParams::from_values(ModelSpec::linear(1), vec![2.0, 1.0]).unwrap();
        let ds = dataset(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        let r = evaluate(&model, &ds).unwrap();
        assert_eq!((r.mse, r.mae), (0.0, 0.0));
        assert!((r.gm - GM_EPSILON).abs() < 1e-20);
        assert!((r.pearson.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_constant_model() {
        let model = ModelParams::from_values(ModelSpec::linear(1), vec![0.0, 2.0]).unwrap();
        let ds = dataset(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        let r = evaluate(&model, &ds).unwrap();
        assert!(r.pearson.is_none());
        assert!(r.mse.is_finite() && r.mae.is_finite() && r.gm.is_finite());
    }
}
