//! A fixed-topology multilayer perceptron in double precision with explicit
//! forward and backward passes. Hidden layers use a rectifier, the output
//! layer is linear.

mod adam;
mod gradcheck;
mod io;

pub use adam::{AdamConfig, OptimizerState};
pub use gradcheck::{gradient_check, gradient_check_report, relative_error, GradientCheckReport};
pub use io::{read_params, write_params};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layer with a row-major `outputs x inputs` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.biases)
                .map(|(row, b)| row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x)),
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    layers: Vec<Layer>,
}

/// Per-layer values retained by [`NetworkParams::forward`] for the backward
/// pass. `inputs[k]` feeds layer `k`; `pre[k]` is its pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// One gradient entry per network parameter, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidLayout(format!(
            "need at least two layer sizes, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidLayout(format!(
            "layer sizes must be positive, got {sizes:?}"
        )));
    }
    Ok(())
}

fn activation_for(k: usize, n_layers: usize) -> Activation {
    if k + 1 == n_layers {
        Activation::Identity
    } else {
        Activation::Relu
    }
}

impl NetworkParams {
    /// Uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = rng::seeded(seed);
        Self::init_with(sizes, &mut rng)
    }

    pub fn init_with(sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let limit = init_limit(layer.inputs, layer.outputs);
            for w in &mut layer.weights {
                *w = rng::uniform_range(rng, -limit, limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| Layer::zeros(w[0], w[1], activation_for(k, n)))
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidLayout("no layers".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.inputs == 0 || layer.outputs == 0 {
                return Err(Error::InvalidLayout(format!(
                    "layer {k} has a zero dimension"
                )));
            }
            if layer.weights.len() != layer.inputs * layer.outputs
                || layer.biases.len() != layer.outputs
            {
                return Err(Error::InvalidLayout(format!(
                    "layer {k} storage does not match {}x{}",
                    layer.outputs, layer.inputs
                )));
            }
            if k > 0 && layers[k - 1].outputs != layer.inputs {
                return Err(Error::InvalidLayout(format!(
                    "layer {k} expects {} inputs but layer {} has {} outputs",
                    layer.inputs,
                    k - 1,
                    layers[k - 1].outputs
                )));
            }
            if layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|v| !v.is_finite())
            {
                return Err(Error::NonFinite {
                    layer: k,
                    stage: "construction",
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn locate(&self, mut idx: usize) -> (usize, bool, usize) {
        for (k, l) in self.layers.iter().enumerate() {
            if idx < l.weights.len() {
                return (k, true, idx);
            }
            idx -= l.weights.len();
            if idx < l.biases.len() {
                return (k, false, idx);
            }
            idx -= l.biases.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: each layer's weights, then its biases.
    pub fn get(&self, idx: usize) -> f64 {
        let (k, is_weight, i) = self.locate(idx);
        if is_weight {
            self.layers[k].weights[i]
        } else {
            self.layers[k].biases[i]
        }
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        let (k, is_weight, i) = self.locate(idx);
        if is_weight {
            self.layers[k].weights[i] = value;
        } else {
            self.layers[k].biases[i] = value;
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Forward pass without keeping intermediate values.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut next);
            for v in &mut next {
                *v = layer.activation.apply(*v);
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: k,
                    stage: "forward",
                });
            }
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ActivationTrace)> {
        self.check_input(input)?;
        let mut trace = ActivationTrace {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut current = input.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::with_capacity(layer.outputs);
            layer.affine(&current, &mut pre);
            let post: Vec<f64> = pre.iter().map(|&v| layer.activation.apply(v)).collect();
            if post.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: k,
                    stage: "forward",
                });
            }
            trace.inputs.push(std::mem::replace(&mut current, post));
            trace.pre.push(pre);
        }
        Ok((current, trace))
    }

    pub fn backward(
        &self,
        trace: &ActivationTrace,
        output_gradient: &[f64],
    ) -> Result<GradientSet> {
        let mut grads = GradientSet::zeros_like(self);
        self.backward_into(trace, output_gradient, &mut grads)?;
        Ok(grads)
    }

    /// Adds the parameter gradient for one forward trace into `grads`.
    pub fn backward_into(
        &self,
        trace: &ActivationTrace,
        output_gradient: &[f64],
        grads: &mut GradientSet,
    ) -> Result<()> {
        if trace.pre.len() != self.layers.len() || trace.inputs.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: trace.pre.len(),
            });
        }
        if output_gradient.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: output_gradient.len(),
            });
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: grads.layers.len(),
            });
        }

        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = output_gradient
            .iter()
            .zip(&trace.pre[last])
            .map(|(g, &p)| g * self.layers[last].activation.derivative(p))
            .collect();

        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.inputs[k];
            if input.len() != layer.inputs || trace.pre[k].len() != layer.outputs {
                return Err(Error::DimensionMismatch {
                    expected: layer.inputs,
                    actual: input.len(),
                });
            }
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
                g.biases[o] += d;
            }
            if g.weights.iter().chain(&g.biases).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer: k,
                    stage: "backward",
                });
            }
            if k > 0 {
                let below = &self.layers[k - 1];
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, &pre) in prev.iter_mut().zip(&trace.pre[k - 1]) {
                    *p *= below.activation.derivative(pre);
                }
                delta = prev;
            }
        }
        Ok(())
    }
}

pub fn init_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|v| *v *= factor);
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()))
    }

    pub fn matches_shape(&self, params: &NetworkParams) -> bool {
        self.layers.len() == params.layers.len()
            && self.layers.iter().zip(&params.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            })
    }
}
