//! Maximum (proportional) exact lumpability over a network.
//!
//! Layers are processed top-down from layer 1 to `k - 1`. Each hidden
//! neuron `v` of layer `l` gets a signature `[b(v); s_1; ..; s_m]` where
//! `s_j = sum_{u in B_j} W(u, v) / rho(u)` over the blocks `B_j` of the
//! already-fixed partition of layer `l - 1`. Neurons whose signatures are
//! positively proportional are merged and `rho` records the factor. The
//! division by the previous layer's `rho` is what makes merging exact at
//! every depth; with plain block sums a merged block with non-constant
//! `rho` upstream can make two downstream neurons look alike when they
//! are not (see `plain_sums_break_at_depth_two` below).
//!
//! The input layer and the output layer are always the identity.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::network::Network;
use crate::partition::{self, max_abs, Comparator, Mode};

/// Partition of one layer. Blocks are ascending and ordered by their first
/// (smallest) member, which is the block representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPartition {
    blocks: Vec<Vec<usize>>,
}

impl LayerPartition {
    pub fn identity(width: usize) -> Self {
        LayerPartition { blocks: (0..width).map(|i| vec![i]).collect() }
    }

    /// Sorts members and blocks into canonical order. Coverage is checked
    /// by [`check_lumpability`], not here.
    pub fn from_blocks(mut blocks: Vec<Vec<usize>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b.first().copied().unwrap_or(usize::MAX));
        LayerPartition { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn width(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn representative(&self, block: usize) -> usize {
        self.blocks[block][0]
    }

    pub fn is_identity(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 1)
    }

    /// Block index of every neuron.
    pub fn labels(&self) -> Vec<usize> {
        partition::block_labels(&self.blocks, self.width())
    }

    /// Number of neurons removed by collapsing this layer.
    pub fn merged(&self) -> usize {
        self.width() - self.len()
    }
}

/// Per-layer partitions (layers `0..=k`) and scaling factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lumping {
    pub mode: Mode,
    pub tol: f64,
    layers: Vec<LayerPartition>,
    rho: Vec<Vec<f64>>,
}

impl Lumping {
    /// Assembles a lumping without checking it; see [`check_lumpability`].
    pub fn from_parts(mode: Mode, tol: f64, layers: Vec<LayerPartition>, rho: Vec<Vec<f64>>) -> Self {
        Lumping { mode, tol, layers, rho }
    }

    /// All-singleton partitions with `rho == 1`.
    pub fn identity(net: &Network, mode: Mode, tol: f64) -> Self {
        let widths = net.widths();
        Lumping {
            mode,
            tol,
            layers: widths.iter().map(|&w| LayerPartition::identity(w)).collect(),
            rho: widths.iter().map(|&w| vec![1.0; w]).collect(),
        }
    }

    /// Partition of layer `l` in `0..=k`.
    pub fn layer(&self, l: usize) -> &LayerPartition {
        &self.layers[l]
    }

    pub fn layers(&self) -> &[LayerPartition] {
        &self.layers
    }

    pub fn rho(&self, l: usize) -> &[f64] {
        &self.rho[l]
    }

    pub fn rhos(&self) -> &[Vec<f64>] {
        &self.rho
    }

    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(LayerPartition::is_identity)
    }

    pub fn merged(&self) -> usize {
        self.layers.iter().map(LayerPartition::merged).sum()
    }
}

/// How incoming weights are aggregated over a block of the previous layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumRule {
    /// `sum_{u in B} W(u, v) / rho(u)`. Sound at every depth.
    RhoWeighted,
    /// `sum_{u in B} W(u, v)`. Diagnostic only; agrees with the weighted
    /// form whenever `rho` is constant on each previous-layer block.
    Plain,
}

/// Signature of every neuron of layer `l` (`1 <= l <= k`) against the
/// given partition of layer `l - 1`.
pub fn signatures(net: &Network, l: usize, prev: &LayerPartition, prev_rho: &[f64]) -> Vec<Vec<f64>> {
    signatures_with(net, l, prev, prev_rho, SumRule::RhoWeighted)
}

pub fn signatures_with(
    net: &Network,
    l: usize,
    prev: &LayerPartition,
    prev_rho: &[f64],
    rule: SumRule,
) -> Vec<Vec<f64>> {
    let layer = net.layer(l);
    let width = layer.out_width();
    let dim = 1 + prev.len();
    let mut sums = vec![0.0; width * prev.len()];
    for (b, members) in prev.blocks().iter().enumerate() {
        for &u in members {
            let row = layer.row(u);
            let scale = match rule {
                SumRule::RhoWeighted => prev_rho[u],
                SumRule::Plain => 1.0,
            };
            for (v, &w) in row.iter().enumerate() {
                sums[v * prev.len() + b] += w / scale;
            }
        }
    }
    (0..width)
        .map(|v| {
            let mut sig = Vec::with_capacity(dim);
            sig.push(layer.bias()[v]);
            sig.extend_from_slice(&sums[v * prev.len()..(v + 1) * prev.len()]);
            sig
        })
        .collect()
}

/// Groups the neurons of one layer by their signatures. Returns the
/// partition and `rho` with `rho(rep) == 1` on every block.
pub fn partition_layer(sigs: &[Vec<f64>], mode: Mode, tol: f64) -> (LayerPartition, Vec<f64>) {
    let scale = sigs.iter().map(|s| max_abs(s)).fold(0.0, f64::max);
    let cmp = Comparator::new(mode, tol, scale);
    let g = partition::group(sigs, &cmp);
    (LayerPartition { blocks: g.blocks }, g.rho)
}

/// Maximum lumpability of a validated network.
pub fn max_lumpability(net: &Network, mode: Mode, tol: f64) -> Lumping {
    let k = net.depth();
    let mut layers = Vec::with_capacity(k + 1);
    let mut rho = Vec::with_capacity(k + 1);
    layers.push(LayerPartition::identity(net.input_width()));
    rho.push(vec![1.0; net.input_width()]);
    for l in 1..k {
        let sigs = signatures(net, l, &layers[l - 1], &rho[l - 1]);
        let (p, r) = partition_layer(&sigs, mode, tol);
        layers.push(p);
        rho.push(r);
    }
    layers.push(LayerPartition::identity(net.output_width()));
    rho.push(vec![1.0; net.output_width()]);
    Lumping { mode, tol, layers, rho }
}

/// One failed equation: `rho(t) sig(t)[component] != rho(rep) sig(rep)[component]`.
/// Component 0 is the bias; component `j >= 1` is previous-layer block `j - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LumpViolation {
    pub layer: usize,
    pub block: usize,
    pub representative: usize,
    pub neuron: usize,
    pub component: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for LumpViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "layer {} block {}: neurons ({}, {}) differ on component {} ({} vs {})",
            self.layer, self.block, self.representative, self.neuron, self.component, self.lhs, self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LumpCheckError {
    /// The lumping does not describe this network's layers.
    Shape(String),
    Violations(Vec<LumpViolation>),
}

impl fmt::Display for LumpCheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LumpCheckError::Shape(msg) => write!(f, "lumping shape mismatch: {msg}"),
            LumpCheckError::Violations(vs) => {
                write!(f, "{} lumpability equation(s) violated", vs.len())?;
                if let Some(v) = vs.first() {
                    write!(f, "; first: {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LumpCheckError {}

fn check_shape(net: &Network, lump: &Lumping) -> Result<(), String> {
    let k = net.depth();
    if lump.layers.len() != k + 1 || lump.rho.len() != k + 1 {
        return Err(format!(
            "expected {} layer partitions, got {} partitions and {} rho vectors",
            k + 1,
            lump.layers.len(),
            lump.rho.len()
        ));
    }
    for l in 0..=k {
        let width = net.width(l);
        let p = &lump.layers[l];
        let mut seen = vec![false; width];
        for (b, members) in p.blocks.iter().enumerate() {
            if members.is_empty() {
                return Err(format!("layer {l} block {b} is empty"));
            }
            if members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("layer {l} block {b} is not strictly ascending"));
            }
            if b > 0 && p.blocks[b - 1][0] >= members[0] {
                return Err(format!("layer {l} blocks are not ordered by representative"));
            }
            for &m in members {
                if m >= width {
                    return Err(format!("layer {l} block {b}: neuron {m} out of range (width {width})"));
                }
                if seen[m] {
                    return Err(format!("layer {l}: neuron {m} appears twice"));
                }
                seen[m] = true;
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(format!("layer {l}: neuron {m} not covered"));
        }
        if (l == 0 || l == k) && !p.is_identity() {
            return Err(format!("layer {l} must be the identity partition"));
        }
        let r = &lump.rho[l];
        if r.len() != width {
            return Err(format!("layer {l}: rho has length {}, expected {width}", r.len()));
        }
        if let Some(i) = r.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(format!("layer {l}: rho({i}) = {} is not a positive number", r[i]));
        }
        if lump.mode == Mode::Exact && r.iter().any(|&x| x != 1.0) {
            return Err(format!("layer {l}: exact-mode lumping must have rho == 1"));
        }
    }
    Ok(())
}

/// Verifies every lumpability equation of `lump` on `net` within `tol`.
///
/// Each member is compared against its block representative on every
/// component of the signature; the absolute threshold is
/// `2 tol (1 + m)` where `m` is the largest `|rho(v) sig(v)|` component in
/// the layer.
pub fn check_lumpability(net: &Network, lump: &Lumping, tol: f64) -> Result<(), LumpCheckError> {
    check_lumpability_with(net, lump, tol, SumRule::RhoWeighted)
}

pub fn check_lumpability_with(
    net: &Network,
    lump: &Lumping,
    tol: f64,
    rule: SumRule,
) -> Result<(), LumpCheckError> {
    check_shape(net, lump).map_err(LumpCheckError::Shape)?;
    let mut violations = Vec::new();
    for l in 1..net.depth() {
        let sigs = signatures_with(net, l, &lump.layers[l - 1], &lump.rho[l - 1], rule);
        let rho = &lump.rho[l];
        let scaled: Vec<Vec<f64>> =
            sigs.iter().zip(rho).map(|(s, &r)| s.iter().map(|x| r * x).collect()).collect();
        let scale = scaled.iter().map(|s| max_abs(s)).fold(0.0, f64::max);
        let thr = 2.0 * tol * (1.0 + scale);
        for (b, members) in lump.layers[l].blocks.iter().enumerate() {
            let rep = members[0];
            for &t in &members[1..] {
                for (c, (&lhs, &rhs)) in scaled[t].iter().zip(&scaled[rep]).enumerate() {
                    if (lhs - rhs).abs() > thr {
                        violations.push(LumpViolation {
                            layer: l,
                            block: b,
                            representative: rep,
                            neuron: t,
                            component: c,
                            lhs,
                            rhs,
                        });
                    }
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(LumpCheckError::Violations(violations))
    }
}
