//! Dense numeric kernels shared by the discriminator, the policy and t-SNE.
//!
//! Networks are plain fully connected MLPs whose parameters live in one flat
//! [`ParamVector`]. Each layer occupies `fan_out * fan_in` row-major weights
//! followed by `fan_out` biases. Hidden layers use the configured activation;
//! the output layer is linear.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Shape of one dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
}

impl LayerShape {
    pub fn num_params(&self) -> usize {
        self.fan_out * self.fan_in + self.fan_out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: &[usize], output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            activation: Activation::Tanh,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::contract(format!(
                "all MLP dimensions must be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn layout(&self) -> Vec<LayerShape> {
        let mut shapes = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        for &h in self
            .hidden_dims
            .iter()
            .chain(std::iter::once(&self.output_dim))
        {
            shapes.push(LayerShape { fan_in, fan_out: h });
            fan_in = h;
        }
        shapes
    }

    pub fn num_params(&self) -> usize {
        self.layout().iter().map(LayerShape::num_params).sum()
    }

    /// Gaussian fan-in scaled weights, zero biases. The output layer's weights
    /// are additionally multiplied by `output_scale`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R, output_scale: f64) -> ParamVector {
        let layout = self.layout();
        let last = layout.len() - 1;
        let mut values = Vec::with_capacity(self.num_params());
        for (idx, shape) in layout.iter().enumerate() {
            let std = (1.0 / shape.fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("finite std");
            let scale = if idx == last { output_scale } else { 1.0 };
            values.extend((0..shape.fan_in * shape.fan_out).map(|_| scale * normal.sample(rng)));
            values.extend(std::iter::repeat_n(0.0, shape.fan_out));
        }
        ParamVector { values, layout }
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.layout != self.layout() {
            return Err(Error::contract(
                "parameter layout does not match the MLP spec",
            ));
        }
        Ok(())
    }

    /// Forward pass keeping every layer's output for backpropagation.
    pub fn forward_trace(&self, params: &ParamVector, input: &[f64]) -> Result<ForwardTrace> {
        let mut trace = ForwardTrace::default();
        self.forward_into(params, input, &mut trace)?;
        Ok(trace)
    }

    /// Like [`MlpSpec::forward_trace`], reusing the buffers of `trace`.
    pub fn forward_into(
        &self,
        params: &ParamVector,
        input: &[f64],
        trace: &mut ForwardTrace,
    ) -> Result<()> {
        self.check_params(params)?;
        check_dim("mlp input", self.input_dim, input.len())?;
        let n_layers = params.layout.len();
        trace.activations.resize_with(n_layers + 1, Vec::new);
        trace.activations[0].clear();
        trace.activations[0].extend_from_slice(input);
        let mut offset = 0;
        for (idx, shape) in params.layout.iter().enumerate() {
            let (done, rest) = trace.activations.split_at_mut(idx + 1);
            let x = &done[idx];
            let out = &mut rest[0];
            out.clear();
            let n_w = shape.fan_out * shape.fan_in;
            let w = &params.values[offset..offset + n_w];
            let b = &params.values[offset + n_w..offset + shape.num_params()];
            let is_output = idx + 1 == n_layers;
            out.extend(w.chunks_exact(shape.fan_in).zip(b).map(|(row, &bj)| {
                let z = bj + dot(row, x);
                if is_output {
                    z
                } else {
                    self.activation.apply(z)
                }
            }));
            offset += shape.num_params();
        }
        Ok(())
    }

    /// Accumulates `d(output . output_grad) / d(params)` into `grad`, using
    /// the activations recorded in `trace` (whose scratch space is reused).
    pub fn backprop_into(
        &self,
        params: &ParamVector,
        trace: &mut ForwardTrace,
        output_grad: &[f64],
        grad: &mut ParamVector,
    ) -> Result<()> {
        self.check_params(params)?;
        check_dim("mlp output gradient", self.output_dim, output_grad.len())?;
        check_dim("gradient buffer", params.values.len(), grad.values.len())?;
        let layout = &params.layout;
        let ForwardTrace {
            activations,
            delta,
            scratch,
        } = trace;
        if activations.len() != layout.len() + 1 {
            return Err(Error::contract(
                "backprop needs a trace from a forward pass",
            ));
        }
        delta.clear();
        delta.extend_from_slice(output_grad);
        let mut end = params.values.len();
        for idx in (0..layout.len()).rev() {
            let shape = layout[idx];
            let off = end - shape.num_params();
            end = off;
            let x = &activations[idx];
            let n_w = shape.fan_out * shape.fan_in;
            let g = &mut grad.values[off..off + shape.num_params()];
            let (gw, gb) = g.split_at_mut(n_w);
            for ((row, &dj), bj) in gw.chunks_exact_mut(shape.fan_in).zip(delta.iter()).zip(gb) {
                if dj != 0.0 {
                    for (gi, &xi) in row.iter_mut().zip(x) {
                        *gi += dj * xi;
                    }
                }
                *bj += dj;
            }
            if idx > 0 {
                let w = &params.values[off..off + n_w];
                scratch.clear();
                scratch.resize(shape.fan_in, 0.0);
                for (row, &dj) in w.chunks_exact(shape.fan_in).zip(delta.iter()) {
                    if dj != 0.0 {
                        for (p, &wij) in scratch.iter_mut().zip(row) {
                            *p += dj * wij;
                        }
                    }
                }
                for (p, &a) in scratch.iter_mut().zip(x) {
                    *p *= self.activation.derivative_from_output(a);
                }
                std::mem::swap(delta, scratch);
            }
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-layer outputs of one forward pass; `activations[0]` is the input.
#[derive(Clone, Debug, Default)]
pub struct ForwardTrace {
    activations: Vec<Vec<f64>>,
    delta: Vec<f64>,
    scratch: Vec<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations
            .last()
            .expect("trace always holds the input")
    }
}

/// Flat parameter storage plus the layer layout that gives it meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<LayerShape>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Vec<LayerShape>) -> Result<Self> {
        let expected: usize = layout.iter().map(LayerShape::num_params).sum();
        check_dim("parameter vector", expected, values.len())?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("parameter {bad} is not finite")));
        }
        Ok(Self { values, layout })
    }

    pub fn zeros(layout: Vec<LayerShape>) -> Self {
        let n = layout.iter().map(LayerShape::num_params).sum();
        Self {
            values: vec![0.0; n],
            layout,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            layout: self.layout.clone(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &[LayerShape] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Range of the flat vector holding the biases of layer `layer`.
    pub fn bias_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start: usize = self.layout[..layer]
            .iter()
            .map(LayerShape::num_params)
            .sum();
        let shape = self.layout[layer];
        let b = start + shape.fan_in * shape.fan_out;
        b..b + shape.fan_out
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    let mut trace = spec.forward_trace(params, input)?;
    Ok(trace.activations.pop().expect("output layer present"))
}

/// Gradient of `output . output_grad` with respect to every parameter.
pub fn mlp_gradient(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    output_grad: &[f64],
) -> Result<ParamVector> {
    let mut trace = spec.forward_trace(params, input)?;
    let mut grad = params.zeros_like();
    spec.backprop_into(params, &mut trace, output_grad, &mut grad)?;
    Ok(grad)
}

pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::contract(format!(
            "softmax temperature must be positive, got {temperature}"
        )));
    }
    if logits.is_empty() {
        return Err(Error::contract("softmax of an empty vector"));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::contract("softmax logits must be finite"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&l| ((l - max) / temperature).exp())
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    Ok(out)
}

/// `log(sum(exp(xs)))`, shifted by the max for stability.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Inverse-CDF draw from a probability vector. Assumes `p` is normalised;
/// rounding slack at the top end falls to the last positive entry.
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(p.len() - 1)
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    validate_distribution(p, 1e-9)?;
    Ok(-p
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>())
    .map(|h: f64| h.max(0.0))
}

pub(crate) fn validate_distribution(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::contract("empty probability vector"));
    }
    if let Some(bad) = p.iter().find(|&&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::contract(format!(
            "probability entries must be finite and non-negative, found {bad}"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::contract(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// First-order update rules. Both descend the supplied gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(3e-4)
    }
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn init_state(&self, num_params: usize) -> OptState {
        match self {
            Optimizer::Sgd { .. } => OptState {
                step: 0,
                first_moment: Vec::new(),
                second_moment: Vec::new(),
            },
            Optimizer::Adam { .. } => OptState {
                step: 0,
                first_moment: vec![0.0; num_params],
                second_moment: vec![0.0; num_params],
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptState {
    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

pub fn optimizer_step(
    optimizer: &Optimizer,
    params: &mut ParamVector,
    grads: &ParamVector,
    state: &mut OptState,
) -> Result<()> {
    if params.layout != grads.layout {
        return Err(Error::contract("gradient layout does not match parameters"));
    }
    state.step += 1;
    match *optimizer {
        Optimizer::Sgd { lr } => {
            for (p, g) in params.values.iter_mut().zip(&grads.values) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            eps,
        } => {
            check_dim("adam state", params.len(), state.first_moment.len())?;
            let t = state.step as i32;
            let bc1 = 1.0 - beta1.powi(t);
            let bc2 = 1.0 - beta2.powi(t);
            for (((p, &g), m), v) in params
                .values
                .iter_mut()
                .zip(&grads.values)
                .zip(state.first_moment.iter_mut())
                .zip(state.second_moment.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
