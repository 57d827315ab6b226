use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use intreg::datagen::{
    make_interval_dataset, sample_interval_direct, sample_interval_rejection, GenConfig,
    SamplerKind,
};
use intreg::io::{read_interval_csv, write_interval_csv_to};
use intreg::losses::{
    avgl_grad, base_loss, base_loss_grad, indicator_lm, loss_eval, selection_target,
    strategy_error_analytics, surrogate_lm, surrogate_lm_grad, BaseLossKind, LossSpec,
    SelectionStrategy,
};
use intreg::metrics::{geometric_mean_error, mae, mse, pearson, GM_EPSILON};
use intreg::models::{grad_check, init_params, ModelParams, ModelSpec};
use intreg::{Interval, LabeledDataset, LabeledExample, RngHandle, WeakLabel};

fn interval() -> impl Strategy<Value = Interval> {
    (-50.0f64..50.0, 0.0f64..20.0).prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
}

fn base_kind() -> impl Strategy<Value = BaseLossKind> {
    prop_oneof![
        Just(BaseLossKind::Mse),
        Just(BaseLossKind::Mae),
        (0.1f64..10.0).prop_map(|delta| BaseLossKind::Huber { delta }),
    ]
}

fn distance(pred: f64, s: &Interval) -> f64 {
    (s.lower() - pred).max(pred - s.upper()).max(0.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    #[test]
    fn avgl_mae_gradient_equals_surrogate(s in interval(), pred in -80.0f64..80.0) {
        prop_assume!(pred != s.lower() && pred != s.upper());
        prop_assert_eq!(avgl_grad(BaseLossKind::Mae, pred, &s), surrogate_lm_grad(pred, &s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2_000, ..ProptestConfig::default() })]

    #[test]
    fn surrogate_zero_set_matches_indicator(s in interval(), pred in -80.0f64..80.0) {
        prop_assert_eq!(surrogate_lm(pred, &s) == 0.0, indicator_lm(pred, &s) == 0.0);
        if distance(pred, &s) >= 1.0 {
            prop_assert!(surrogate_lm(pred, &s) >= indicator_lm(pred, &s));
        }
    }

    #[test]
    fn surrogate_is_convex(s in interval(), p1 in -80.0f64..80.0, p2 in -80.0f64..80.0, t in 0.0f64..1.0) {
        let mixed = surrogate_lm(t * p1 + (1.0 - t) * p2, &s);
        let chord = t * surrogate_lm(p1, &s) + (1.0 - t) * surrogate_lm(p2, &s);
        prop_assert!(mixed <= chord + 1e-12, "{} > {}", mixed, chord);
    }

    #[test]
    fn degenerate_interval_reduces_to_point_losses(y in -50.0f64..50.0, pred in -80.0f64..80.0, base in base_kind()) {
        let s = Interval::point(y).unwrap();
        prop_assert_eq!(surrogate_lm(pred, &s), (pred - y).abs());
        for strategy in SelectionStrategy::ALL {
            let spec = LossSpec::Selection { strategy, base };
            let v = loss_eval(&spec, pred, WeakLabel::Interval(s)).unwrap().value;
            prop_assert_eq!(v, base_loss(base, pred, y));
        }
    }

    #[test]
    fn base_gradients_match_central_differences(base in base_kind(), pred in -30.0f64..30.0, target in -30.0f64..30.0) {
        let e = pred - target;
        let kink = match base {
            BaseLossKind::Mse => None,
            BaseLossKind::Mae => Some(0.0),
            BaseLossKind::Huber { delta } => Some(delta),
        };
        if let Some(k) = kink {
            prop_assume!((e.abs() - k).abs() > 1e-3 && e.abs() > 1e-3);
        }
        let h = 1e-6;
        let numeric = (base_loss(base, pred + h, target) - base_loss(base, pred - h, target)) / (2.0 * h);
        let analytic = base_loss_grad(base, pred, target);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0);
        prop_assert!(rel < 1e-5, "{:?}: analytic {} numeric {}", base, analytic, numeric);
    }

    #[test]
    fn direct_intervals_contain_label_and_respect_size(y in -100.0f64..100.0, q in 0.01f64..50.0, seed in any::<u64>()) {
        let s = sample_interval_direct(y, q, &mut RngHandle::new(seed)).unwrap();
        prop_assert!(s.contains(y));
        prop_assert!(s.size() <= q * (1.0 + 1e-12));
    }

    #[test]
    fn metric_identities(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
                         scale in 0.1f64..10.0, shift in -100.0f64..100.0) {
        let (preds, targets): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let m2 = mse(&preds, &targets).unwrap();
        let m1 = mae(&preds, &targets).unwrap();
        prop_assert!(m1 * m1 <= m2 * (1.0 + 1e-12));
        prop_assert!(geometric_mean_error(&preds, &targets, GM_EPSILON).unwrap() <= m1 * (1.0 + 1e-12));
        let moved: Vec<f64> = preds.iter().map(|p| scale * p + shift).collect();
        let r = pearson(&preds, &targets).unwrap();
        prop_assert!((r - pearson(&moved, &targets).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn rejection_intervals_contain_label(y in 0.0f64..10.0, q in 0.5f64..10.0, seed in any::<u64>()) {
        let (s, stats) = sample_interval_rejection(y, q, 0.0, 10.0, &mut RngHandle::new(seed)).unwrap();
        prop_assert!(s.contains(y));
        prop_assert!(s.size() <= q);
        prop_assert!(stats.accepted == 1 && stats.attempts >= 1 && stats.proposals >= stats.attempts);
    }

    #[test]
    fn interval_csv_round_trip_is_bit_exact(rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 0.0f64..10.0), 1..30),
                                            q in 0.5f64..50.0, seed in any::<u64>(), rejection in any::<bool>()) {
        let labeled = LabeledDataset::new(
            3,
            rows.into_iter().map(|(features, target)| LabeledExample { features, target }).collect(),
        ).unwrap();
        let mut cfg = GenConfig::new(q);
        if rejection {
            cfg.sampler = SamplerKind::Rejection;
        }
        let (weak, _) = make_interval_dataset(&labeled, &cfg, &mut RngHandle::new(seed)).unwrap();
        let mut buf = Vec::new();
        write_interval_csv_to(&weak, &mut buf).unwrap();
        let back = read_interval_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.rows().len(), weak.rows().len());
        for (a, b) in back.rows().iter().zip(weak.rows()) {
            prop_assert_eq!(a.interval.lower().to_bits(), b.interval.lower().to_bits());
            prop_assert_eq!(a.interval.upper().to_bits(), b.interval.upper().to_bits());
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let (ha, hb) = (back.hidden_targets().unwrap(), weak.hidden_targets().unwrap());
        prop_assert!(ha.iter().zip(hb).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn selection_error_analytics_match_monte_carlo() {
    let mut rng = RngHandle::new(17);
    let n = 200_000;
    for a in [1.0, 4.0, 10.0] {
        for strategy in SelectionStrategy::ALL {
            let mut total = 0.0;
            for _ in 0..n {
                let lo = rng.uniform(-5.0, 5.0).unwrap();
                let s = Interval::new(lo, lo + a).unwrap();
                let y = rng.uniform(s.lower(), s.upper()).unwrap();
                total += (y - selection_target(strategy, &s)).abs();
            }
            let (_, expected) = strategy_error_analytics(strategy, a);
            let mc = total / n as f64;
            assert!((mc / expected - 1.0).abs() < 0.01, "{strategy:?} a={a}: {mc} vs {expected}");
        }
    }
}

/// Forward pass with dense matrices: `W_l a + b_l`, ReLU on hidden layers.
fn oracle_forward(params: &ModelParams, x: &[f64]) -> f64 {
    let widths = params.spec().widths();
    let values = params.values();
    let mut offset = 0;
    let mut a = DVector::from_column_slice(x);
    for (l, pair) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let w = DMatrix::from_row_slice(fan_out, fan_in, &values[offset..offset + fan_in * fan_out]);
        offset += fan_in * fan_out;
        let b = DVector::from_column_slice(&values[offset..offset + fan_out]);
        offset += fan_out;
        a = w * a + b;
        if l + 2 < widths.len() {
            a.apply(|v| *v = v.max(0.0));
        }
    }
    assert_eq!(offset, values.len());
    a[0]
}

#[test]
fn forward_matches_dense_matrix_oracle() {
    let mut rng = RngHandle::new(23);
    for spec in [ModelSpec::linear(7), ModelSpec::mlp(1), ModelSpec::mlp(8), ModelSpec::mlp(33)] {
        for _ in 0..50 {
            let mut params = init_params(spec, &mut rng).unwrap();
            for v in params.values_mut() {
                *v += 0.05 * rng.normal();
            }
            let x: Vec<f64> = (0..spec.dimension).map(|_| rng.normal()).collect();
            let ours = params.forward(&x).unwrap();
            let oracle = oracle_forward(&params, &x);
            assert!((ours - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "{ours} vs {oracle}");
        }
    }
}

#[test]
fn forward_batch_is_bitwise_per_row() {
    let mut rng = RngHandle::new(29);
    let params = init_params(ModelSpec::mlp(5), &mut rng).unwrap();
    let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
    let batch = params.forward_batch(&rows).unwrap();
    for (row, b) in rows.iter().zip(batch) {
        assert_eq!(params.forward(row).unwrap().to_bits(), b.to_bits());
    }
}

#[test]
fn end_to_end_gradients_for_every_trainable_loss() {
    let specs = [
        LossSpec::Supervised { base: BaseLossKind::Mse },
        LossSpec::Supervised { base: BaseLossKind::Mae },
        LossSpec::Supervised { base: BaseLossKind::Huber { delta: 1.0 } },
        LossSpec::Selection { strategy: SelectionStrategy::Leftmost, base: BaseLossKind::Mse },
        LossSpec::Selection { strategy: SelectionStrategy::Rightmost, base: BaseLossKind::Mae },
        LossSpec::Selection { strategy: SelectionStrategy::Middlemost, base: BaseLossKind::Huber { delta: 5.0 } },
        LossSpec::Avgl { base: BaseLossKind::Mse },
        LossSpec::Avgl { base: BaseLossKind::Mae },
        LossSpec::SurrogateLm,
    ];
    for seed in 0..100u64 {
        let mut rng = RngHandle::new(1000 + seed);
        let spec = if seed % 2 == 0 { ModelSpec::mlp(4) } else { ModelSpec::linear(4) };
        let params = init_params(spec, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let pred = params.forward(&x).unwrap();
        // Every kink of every loss sits at a label or endpoint; keep them
        // at least 0.25 from the prediction (Huber kinks at +-delta too).
        let sign = if rng.unit() < 0.5 { -1.0 } else { 1.0 };
        let y = pred + sign * rng.uniform(0.25, 0.75).unwrap();
        let s = Interval::new(pred + 0.3, pred + 0.3 + rng.uniform(0.0, 0.4).unwrap()).unwrap();
        for loss in &specs {
            let label = if loss.needs_exact_labels() {
                WeakLabel::Exact(y)
            } else {
                WeakLabel::Interval(s)
            };
            let err = grad_check(&params, loss, &x, label, 1e-6).unwrap();
            assert!(err < 1e-5, "seed {seed} {}: {err}", loss.label());
        }
    }
}
