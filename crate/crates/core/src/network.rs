//! Feed-forward ReLU/LeakyReLU networks and their exact forward semantics.
//!
//! Layers are numbered `1..=k` as in the usual layered-graph presentation;
//! the input layer `0` carries no parameters and exists only as a width.
//! Weight entry `(i, j)` is the edge from neuron `i` of the previous layer
//! to neuron `j` of this layer. Every dot product is accumulated in
//! ascending source index so results are bitwise reproducible.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu { alpha: f64 },
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x >= 0.0 {
                    x
                } else {
                    alpha * x
                }
            }
        }
    }
}

/// Free-function form of [`Activation::apply`].
pub fn apply_activation(a: Activation, x: f64) -> f64 {
    a.apply(x)
}

/// One dense layer: `in_width x out_width` weights stored row-major
/// (row = source neuron), one bias per target neuron, and a single
/// activation shared by the whole layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    in_width: usize,
    out_width: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        in_width: usize,
        out_width: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Self {
        Layer { in_width, out_width, weights, bias, activation }
    }

    /// Builds a layer from one row per source neuron.
    ///
    /// The output width is taken from the bias length; ragged rows are
    /// caught by [`validate`].
    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        let in_width = rows.len();
        let out_width = bias.len();
        let weights = rows.concat();
        Layer::new(in_width, out_width, weights, bias, activation)
    }

    pub fn in_width(&self) -> usize {
        self.in_width
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    #[inline]
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.out_width + to]
    }

    #[inline]
    pub fn weight_mut(&mut self, from: usize, to: usize) -> &mut f64 {
        &mut self.weights[from * self.out_width + to]
    }

    /// Row-major weight payload.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.weights[from * self.out_width..(from + 1) * self.out_width]
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Incoming weights of target neuron `to`, in ascending source order.
    pub fn column(&self, to: usize) -> Vec<f64> {
        (0..self.in_width).map(|i| self.weight(i, to)).collect()
    }

    /// Affine part `sum_i W(i, j) v_i + b_j` for every target `j`.
    pub fn pre_activation(&self, v: &[f64]) -> Vec<f64> {
        // Row-outer traversal still adds the terms of each acc[j] in
        // ascending source order; the bias goes in last.
        let mut acc = vec![0.0; self.out_width];
        for (i, &vi) in v.iter().enumerate() {
            let row = self.row(i);
            for (a, &w) in acc.iter_mut().zip(row) {
                *a += w * vi;
            }
        }
        for (a, &b) in acc.iter_mut().zip(&self.bias) {
            *a += b;
        }
        acc
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.in_width {
            return Err(Error::Shape { expected: self.in_width, actual: v.len() });
        }
        let mut out = self.pre_activation(v);
        for x in &mut out {
            *x = self.activation.apply(*x);
        }
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.in_width * self.out_width + self.out_width
    }
}

/// A broken well-formedness rule, tagged with the 1-based layer index.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoLayers,
    WeightShape { layer: usize, expected: usize, actual: usize },
    BiasLength { layer: usize, expected: usize, actual: usize },
    Chain { layer: usize, expected: usize, actual: usize },
    NonFiniteWeight { layer: usize, from: usize, to: usize },
    NonFiniteBias { layer: usize, index: usize },
    BadAlpha { layer: usize, alpha: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLayers => write!(f, "network has no layers"),
            Violation::WeightShape { layer, expected, actual } => {
                write!(f, "layer {layer}: weight matrix has {actual} entries, expected {expected}")
            }
            Violation::BiasLength { layer, expected, actual } => {
                write!(f, "layer {layer}: bias has length {actual}, expected {expected}")
            }
            Violation::Chain { layer, expected, actual } => write!(
                f,
                "layer {layer}: input width {actual} does not match previous output width {expected}"
            ),
            Violation::NonFiniteWeight { layer, from, to } => {
                write!(f, "layer {layer}: weight ({from}, {to}) is not finite")
            }
            Violation::NonFiniteBias { layer, index } => {
                write!(f, "layer {layer}: bias {index} is not finite")
            }
            Violation::BadAlpha { layer, alpha } => {
                write!(f, "layer {layer}: leaky_relu alpha {alpha} must be finite and > 0")
            }
        }
    }
}

/// Immutable layered network. Construct with [`Network::new`], which
/// rejects anything [`validate`] would flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let net = Network { layers };
        validate(&net).map_err(Error::InvalidNetwork)?;
        Ok(net)
    }

    /// Skips validation. Only [`validate`] is meaningful on the result.
    pub fn from_layers_unchecked(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    /// Number of parameterised layers `k`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Layer `l` in `1..=k`.
    pub fn layer(&self, l: usize) -> &Layer {
        &self.layers[l - 1]
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width
    }

    /// Width of layer `l` in `0..=k`.
    pub fn width(&self, l: usize) -> usize {
        if l == 0 {
            self.input_width()
        } else {
            self.layers[l - 1].out_width
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..=self.depth()).map(|l| self.width(l)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.layers.iter().map(|l| l.in_width * l.out_width).sum()
    }
}

/// Semantics of layer `l` applied to a valuation of layer `l - 1`.
pub fn forward_layer(net: &Network, l: usize, v: &[f64]) -> Result<Vec<f64>> {
    if l == 0 || l > net.depth() {
        return Err(Error::Shape { expected: net.depth(), actual: l });
    }
    net.layer(l).forward(v)
}

/// Input-output semantics: layers `1..=k` composed left to right.
pub fn forward(net: &Network, input: &[f64]) -> Result<Vec<f64>> {
    let mut v = input.to_vec();
    for l in 1..=net.depth() {
        v = forward_layer(net, l, &v)?;
    }
    Ok(v)
}

/// Every intermediate valuation of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// `values[l]` is the valuation of layer `l`, `l` in `0..=k`.
    pub values: Vec<Vec<f64>>,
    /// `pre_activations[l - 1]` is the affine part of layer `l`.
    pub pre_activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("trace always holds the input")
    }

    /// Pre-activation vector of layer `l` in `1..=k`.
    pub fn pre(&self, l: usize) -> &[f64] {
        &self.pre_activations[l - 1]
    }
}

pub fn forward_trace(net: &Network, input: &[f64]) -> Result<Trace> {
    if input.len() != net.input_width() {
        return Err(Error::Shape { expected: net.input_width(), actual: input.len() });
    }
    let mut values = Vec::with_capacity(net.depth() + 1);
    let mut pre_activations = Vec::with_capacity(net.depth());
    values.push(input.to_vec());
    for layer in net.layers() {
        let pre = layer.pre_activation(values.last().unwrap());
        let post = pre.iter().map(|&x| layer.activation.apply(x)).collect();
        pre_activations.push(pre);
        values.push(post);
    }
    Ok(Trace { values, pre_activations })
}

/// Lists every broken well-formedness rule; `Ok(())` when there are none.
pub fn validate(net: &Network) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if net.layers.is_empty() {
        return Err(vec![Violation::NoLayers]);
    }
    for (idx, layer) in net.layers.iter().enumerate() {
        let l = idx + 1;
        let expected = layer.in_width * layer.out_width;
        if layer.weights.len() != expected {
            out.push(Violation::WeightShape { layer: l, expected, actual: layer.weights.len() });
        } else {
            for (pos, w) in layer.weights.iter().enumerate() {
                if !w.is_finite() {
                    out.push(Violation::NonFiniteWeight {
                        layer: l,
                        from: pos / layer.out_width,
                        to: pos % layer.out_width,
                    });
                }
            }
        }
        if layer.bias.len() != layer.out_width {
            out.push(Violation::BiasLength { layer: l, expected: layer.out_width, actual: layer.bias.len() });
        }
        for (index, b) in layer.bias.iter().enumerate() {
            if !b.is_finite() {
                out.push(Violation::NonFiniteBias { layer: l, index });
            }
        }
        if let Activation::LeakyRelu { alpha } = layer.activation {
            if !(alpha.is_finite() && alpha > 0.0) {
                out.push(Violation::BadAlpha { layer: l, alpha });
            }
        }
        if idx > 0 {
            let prev = net.layers[idx - 1].out_width;
            if layer.in_width != prev {
                out.push(Violation::Chain { layer: l, expected: prev, actual: layer.in_width });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
