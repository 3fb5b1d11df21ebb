//! Layered perceptrons with cached forward passes and hand-written
//! reverse-mode gradients.
//!
//! A layer computes `A = act(X·W + b)` with `W` stored `d_in × d_out`.
//! Generators are two layers (sigmoid hidden, linear output by default);
//! discriminators are three layers ending in a single sigmoid unit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::matrix::Matrix;

const SIGMOID_INPUT_LIMIT: f64 = 500.0;
/// Largest f64 strictly below one.
const SIGMOID_UPPER: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function in the overflow-free branch form. Inputs are clamped
/// to ±500 and the result to the open interval (0, 1).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_INPUT_LIMIT, SIGMOID_INPUT_LIMIT);
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.min(SIGMOID_UPPER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetKind {
    Generator,
    Discriminator,
}

impl NetKind {
    pub fn layer_count(self) -> usize {
        match self {
            NetKind::Generator => 2,
            NetKind::Discriminator => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weight.cols() != bias.len() {
            return shape_err(format!(
                "bias length {} does not match weight columns {}",
                bias.len(),
                weight.cols()
            ));
        }
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn d_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    kind: NetKind,
}

/// Per-layer gradients, shape-congruent with the network they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    /// Post-activation output of each layer.
    outputs: Vec<Matrix>,
    /// Pre-activation `X·W + b` of each layer.
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("cache has at least one layer")
    }

    pub fn pre_activation(&self, layer: usize) -> &Matrix {
        &self.pre_activations[layer]
    }
}

/// Glorot-uniform weights, zero biases, default output activation for the kind.
pub fn init_mlp(dims: &[usize], kind: NetKind, seed: u64) -> Result<Mlp> {
    let out = match kind {
        NetKind::Generator => Activation::Linear,
        NetKind::Discriminator => Activation::Sigmoid,
    };
    init_mlp_with_output(dims, kind, out, seed)
}

pub fn init_mlp_with_output(
    dims: &[usize],
    kind: NetKind,
    output_activation: Activation,
    seed: u64,
) -> Result<Mlp> {
    let layer_count = kind.layer_count();
    if dims.len() != layer_count + 1 {
        return config_err(format!(
            "{kind:?} needs {} layer sizes, got {}",
            layer_count + 1,
            dims.len()
        ));
    }
    if dims.contains(&0) {
        return config_err("layer sizes must be at least 1");
    }
    if kind == NetKind::Discriminator && dims[layer_count] != 1 {
        return config_err("discriminator output width must be 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_count);
    for (i, pair) in dims.windows(2).enumerate() {
        let (d_in, d_out) = (pair[0], pair[1]);
        let bound = (6.0 / (d_in + d_out) as f64).sqrt();
        let data = (0..d_in * d_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let activation = if i + 1 == layer_count {
            output_activation
        } else {
            Activation::Sigmoid
        };
        layers.push(Layer::new(
            Matrix::new(d_in, d_out, data)?,
            vec![0.0; d_out],
            activation,
        )?);
    }
    Ok(Mlp { layers, kind })
}

impl Mlp {
    /// Builds a network from explicit layers. Layer count must match `kind`.
    pub fn from_layers(layers: Vec<Layer>, kind: NetKind) -> Result<Self> {
        if layers.len() != kind.layer_count() {
            return config_err(format!(
                "{kind:?} needs {} layers, got {}",
                kind.layer_count(),
                layers.len()
            ));
        }
        Self::check_chain(&layers)?;
        Ok(Mlp { layers, kind })
    }

    /// Any number of layers; for tests and building blocks.
    pub fn from_layers_unchecked_kind(layers: Vec<Layer>, kind: NetKind) -> Result<Self> {
        if layers.is_empty() {
            return config_err("network needs at least one layer");
        }
        Self::check_chain(&layers)?;
        Ok(Mlp { layers, kind })
    }

    fn check_chain(layers: &[Layer]) -> Result<()> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].d_out() != pair[1].d_in() {
                return shape_err(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].d_out(),
                    i + 1,
                    pair[1].d_in()
                ));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].d_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].d_out()
    }

    /// Layer sizes, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::d_out))
            .collect()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_dim() {
            return shape_err(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            ));
        }
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let mut z = current.matmul(&layer.weight)?;
            z.add_row_vector(&layer.bias)?;
            let act = layer.activation;
            let a = z.map(|v| act.apply(v));
            pre_activations.push(z);
            outputs.push(a.clone());
            current = a;
        }
        Ok((
            current,
            ForwardCache {
                input: x.clone(),
                outputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return shape_err(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            ));
        }
        let mut current = x.matmul(&self.layers[0].weight)?;
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                current = current.matmul(&layer.weight)?;
            }
            current.add_row_vector(&layer.bias)?;
            let act = layer.activation;
            current
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = act.apply(*v));
        }
        Ok(current)
    }

    /// Reverse pass for the upstream gradient `dy` at the network output.
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, dy: &Matrix) -> Result<(Gradients, Matrix)> {
        if cache.len() != self.layers.len() {
            return shape_err(format!(
                "cache has {} layers, network has {}",
                cache.len(),
                self.layers.len()
            ));
        }
        for (i, (layer, out)) in self.layers.iter().zip(&cache.outputs).enumerate() {
            if out.cols() != layer.d_out() {
                return shape_err(format!("cache layer {i} does not match network"));
            }
        }
        if dy.shape() != cache.output().shape() {
            return shape_err(format!(
                "upstream gradient {:?} vs output {:?}",
                dy.shape(),
                cache.output().shape()
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = dy.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.outputs[i];
            let act = layer.activation;
            let dz = delta.zip_map(out, |g, a| g * act.derivative_from_output(a))?;
            let input = if i == 0 {
                &cache.input
            } else {
                &cache.outputs[i - 1]
            };
            let weight = input.t_matmul(&dz)?;
            let bias = dz.column_sums();
            delta = dz.matmul_t(&layer.weight)?;
            grads.push(LayerGrad { weight, bias });
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer: weights row-major then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return shape_err(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            ));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weight.as_mut_slice();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            let n = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: Matrix::zeros(l.d_in(), l.d_out()),
                    bias: vec![0.0; l.d_out()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return shape_err("gradient layer counts differ");
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.add_assign(&b.weight)?;
            if a.bias.len() != b.bias.len() {
                return shape_err("gradient bias lengths differ");
            }
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_congruent_with(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weight.shape() == l.weight.shape() && g.bias.len() == l.bias.len())
    }

    fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| !l.weight.is_finite() || l.bias.iter().any(|v| !v.is_finite()))
    }
}

/// Momentum SGD: `v ← μ·v + g`, `p ← p − lr·v`. With `μ = 0` this is
/// plain `p ← p − lr·g`.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Option<Gradients>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return config_err(format!("learning rate must be positive, got {lr}"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return config_err(format!("momentum must lie in [0, 1), got {momentum}"));
        }
        Ok(Sgd {
            lr,
            momentum,
            velocity: None,
        })
    }

    pub fn velocity(&self) -> Option<&Gradients> {
        self.velocity.as_ref()
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.is_congruent_with(net) {
            return shape_err("gradients do not match network");
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        let velocity = self
            .velocity
            .get_or_insert_with(|| Gradients::zeros_like(net));
        for ((layer, g), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(velocity.layers.iter_mut())
        {
            let params = layer
                .weight
                .as_mut_slice()
                .iter_mut()
                .chain(layer.bias.iter_mut());
            let gs = g.weight.as_slice().iter().chain(g.bias.iter());
            let vs = v.weight.as_mut_slice().iter_mut().chain(v.bias.iter_mut());
            for ((p, &gi), vi) in params.zip(gs).zip(vs) {
                *vi = self.momentum * *vi + gi;
                *p -= self.lr * *vi;
            }
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    first: Option<Gradients>,
    second: Option<Gradients>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return config_err(format!("learning rate must be positive, got {lr}"));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return config_err("Adam betas must lie in [0, 1)");
        }
        Ok(Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            first: None,
            second: None,
        })
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if !grads.is_congruent_with(net) {
            return shape_err("gradients do not match network");
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let first = self.first.get_or_insert_with(|| Gradients::zeros_like(net));
        let second = self
            .second
            .get_or_insert_with(|| Gradients::zeros_like(net));
        for (((layer, g), m), v) in net
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(first.layers.iter_mut())
            .zip(second.layers.iter_mut())
        {
            let params = layer
                .weight
                .as_mut_slice()
                .iter_mut()
                .chain(layer.bias.iter_mut());
            let gs = g.weight.as_slice().iter().chain(g.bias.iter());
            let ms = m.weight.as_mut_slice().iter_mut().chain(m.bias.iter_mut());
            let vs = v.weight.as_mut_slice().iter_mut().chain(v.bias.iter_mut());
            for (((p, &gi), mi), vi) in params.zip(gs).zip(ms).zip(vs) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                *p -= self.lr * (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Either optimizer behind one interface.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(Sgd),
    Adam(Adam),
}

impl Optimizer {
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        match self {
            Optimizer::Sgd(o) => o.step(net, grads),
            Optimizer::Adam(o) => o.step(net, grads),
        }
    }
}

/// One stateless update; equivalent to a fresh `Sgd` taking a single step.
pub fn sgd_step(net: &mut Mlp, grads: &Gradients, lr: f64, momentum: f64) -> Result<()> {
    Sgd::new(lr, momentum)?.step(net, grads)
}
