//! Linear and multilayer-perceptron regressors over a flat parameter vector.
//!
//! Parameters are stored layer by layer: the weight matrix in row-major
//! `(out, in)` order followed by the `out` biases. The linear model is the
//! single layer `d -> 1`; the MLP is `d -> 20 -> 30 -> 10 -> 1` with ReLU on
//! the hidden layers and an identity output. Dot products are summed in
//! ascending input index and the bias is added last, so predictions are
//! bit-reproducible. `ReLU'(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Supervision, WeakLabel};
use crate::losses::{loss_eval, LossSpec};
use crate::rng::RngHandle;

pub const MLP_HIDDEN: [usize; 3] = [20, 30, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub dimension: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    offset: usize,
}

impl Layer {
    fn bias_offset(&self) -> usize {
        self.offset + self.inputs * self.outputs
    }
    fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

impl ModelSpec {
    pub fn linear(dimension: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Linear,
            dimension,
        }
    }

    pub fn mlp(dimension: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            dimension,
        }
    }

    /// Layer widths including the input.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.dimension];
        if self.kind == ModelKind::Mlp {
            w.extend_from_slice(&MLP_HIDDEN);
        }
        w.push(1);
        w
    }

    fn layers(&self) -> Vec<Layer> {
        let widths = self.widths();
        let mut offset = 0;
        widths
            .windows(2)
            .map(|p| {
                let layer = Layer {
                    inputs: p[0],
                    outputs: p[1],
                    offset,
                };
                offset += layer.len();
                layer
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(Layer::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::config("model input dimension must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    spec: ModelSpec,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    spec: ModelSpec,
    values: Vec<f64>,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::from_values(raw.spec, raw.values)
    }
}

/// Glorot-uniform weights, `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`
/// per layer, and zero biases.
pub fn init_params(spec: ModelSpec, rng: &mut RngHandle) -> Result<ModelParams> {
    spec.validate()?;
    let mut values = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let r = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
        for w in &mut values[layer.offset..layer.bias_offset()] {
            *w = rng.uniform(-r, r)?;
        }
    }
    Ok(ModelParams { spec, values })
}

impl ModelParams {
    pub fn from_values(spec: ModelSpec, values: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if values.len() != spec.param_count() {
            return Err(Error::shape(spec.param_count(), values.len()));
        }
        Ok(ModelParams { spec, values })
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        Self::from_values(spec, vec![0.0; spec.param_count()])
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn check_input(&self, dimension: usize) -> Result<()> {
        if dimension != self.spec.dimension {
            return Err(Error::shape(self.spec.dimension, dimension));
        }
        Ok(())
    }

    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        self.check_input(features.len())?;
        Ok(Workspace::new(self.spec).forward(self, features))
    }

    /// Predictions for each row, in order.
    pub fn forward_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut ws = Workspace::new(self.spec);
        rows.iter()
            .map(|x| {
                self.check_input(x.len())?;
                Ok(ws.forward(self, x))
            })
            .collect()
    }

    pub fn predict(&self, data: &dyn Supervision) -> Result<Vec<f64>> {
        self.check_input(data.dimension())?;
        let mut ws = Workspace::new(self.spec);
        Ok((0..data.len()).map(|i| ws.forward(self, data.features(i))).collect())
    }

    /// Gradient of `dloss_dpred * f(x)` with respect to every parameter.
    pub fn backward(&self, features: &[f64], dloss_dpred: f64) -> Result<Vec<f64>> {
        self.check_input(features.len())?;
        let mut ws = Workspace::new(self.spec);
        let mut grad = vec![0.0; self.values.len()];
        ws.forward(self, features);
        ws.backward_into(self, dloss_dpred, &mut grad);
        Ok(grad)
    }
}

/// `out[o] = sum_i w[o, i] * x[i]` for a row-major `w`, each row summed in
/// ascending index order. Rows are processed four at a time to overlap the
/// dependent add chains without changing any row's summation order.
fn matvec(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    let rows = out.len();
    let mut o = 0;
    while o + 4 <= rows {
        let r0 = &w[o * cols..(o + 1) * cols];
        let r1 = &w[(o + 1) * cols..(o + 2) * cols];
        let r2 = &w[(o + 2) * cols..(o + 3) * cols];
        let r3 = &w[(o + 3) * cols..(o + 4) * cols];
        let (mut a0, mut a1, mut a2, mut a3) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..cols {
            let xi = x[i];
            a0 += r0[i] * xi;
            a1 += r1[i] * xi;
            a2 += r2[i] * xi;
            a3 += r3[i] * xi;
        }
        out[o] = a0;
        out[o + 1] = a1;
        out[o + 2] = a2;
        out[o + 3] = a3;
        o += 4;
    }
    for (k, slot) in out.iter_mut().enumerate().skip(o) {
        let mut acc = 0.0;
        for (wi, xi) in w[k * cols..(k + 1) * cols].iter().zip(x) {
            acc += wi * xi;
        }
        *slot = acc;
    }
}

/// Scratch buffers for one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Workspace {
    layers: Vec<Layer>,
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(spec: ModelSpec) -> Self {
        let widths = spec.widths();
        Workspace {
            layers: spec.layers(),
            activations: widths.iter().map(|&w| vec![0.0; w]).collect(),
            deltas: widths.iter().map(|&w| vec![0.0; w]).collect(),
        }
    }

    /// Prediction for `features`; keeps the activations for
    /// [`Workspace::backward_into`]. The caller checks the input length.
    pub fn forward(&mut self, params: &ModelParams, features: &[f64]) -> f64 {
        let values = &params.values;
        let last = self.layers.len() - 1;
        self.activations[0].copy_from_slice(features);
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = self.activations.split_at_mut(l + 1);
            let input = &head[l];
            let output = &mut tail[0];
            let weights = &values[layer.offset..layer.bias_offset()];
            let biases = &values[layer.bias_offset()..layer.offset + layer.len()];
            matvec(weights, layer.inputs, input, output);
            for (out, b) in output.iter_mut().zip(biases) {
                let z = *out + b;
                *out = if l < last && z <= 0.0 { 0.0 } else { z };
            }
        }
        self.activations[last + 1][0]
    }

    /// Adds `dloss_dpred * df/dparams` into `grad`, using the activations of
    /// the last [`Workspace::forward`] call.
    pub fn backward_into(&mut self, params: &ModelParams, dloss_dpred: f64, grad: &mut [f64]) {
        let values = &params.values;
        let n = self.layers.len();
        self.deltas[n][0] = dloss_dpred;
        for l in (0..n).rev() {
            let layer = self.layers[l];
            let (head, tail) = self.deltas.split_at_mut(l + 1);
            let delta_out = &tail[0];
            let input = &self.activations[l];
            let (gw, gb) = grad[layer.offset..layer.offset + layer.len()]
                .split_at_mut(layer.inputs * layer.outputs);
            for (o, &d) in delta_out.iter().enumerate() {
                gb[o] += d;
                if d != 0.0 {
                    for (g, a) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &values[layer.offset..layer.bias_offset()];
            let delta_in = &mut head[l];
            delta_in.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in delta_out.iter().enumerate() {
                let row = &weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (slot, w) in delta_in.iter_mut().zip(row) {
                    *slot += w * d;
                }
            }
            for (slot, &a) in delta_in.iter_mut().zip(input) {
                if a <= 0.0 {
                    *slot = 0.0;
                }
            }
        }
    }
}

/// Largest parameter-wise discrepancy between the analytic gradient of
/// `loss(f(x), label)` and central differences with step `h`, measured as
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1)`.
pub fn grad_check(
    params: &ModelParams,
    loss: &LossSpec,
    features: &[f64],
    label: WeakLabel,
    h: f64,
) -> Result<f64> {
    params.check_input(features.len())?;
    let pred = params.forward(features)?;
    let dpred = loss_eval(loss, pred, label)?.grad;
    let analytic = params.backward(features, dpred)?;
    let mut probe = params.clone();
    let mut ws = Workspace::new(params.spec);
    let mut worst: f64 = 0.0;
    for (j, &a) in analytic.iter().enumerate() {
        let original = probe.values[j];
        probe.values[j] = original + h;
        let up = loss_eval(loss, ws.forward(&probe, features), label)?.value;
        probe.values[j] = original - h;
        let down = loss_eval(loss, ws.forward(&probe, features), label)?.value;
        probe.values[j] = original;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs()).max(1.0);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}
