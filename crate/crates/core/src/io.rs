//! JSON interchange documents.
//!
//! Network document:
//!
//! ```json
//! { "layers": [ { "weights": [[w00, w01], [w10, w11]],
//!                 "bias": [b0, b1],
//!                 "activation": { "kind": "leaky_relu", "alpha": 0.01 } } ] }
//! ```
//!
//! `weights` rows are source neurons and columns target neurons. Numbers
//! are written as shortest round-trip decimals, so save followed by load
//! reproduces every `f64` bit for bit. All indices on disk are 0-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ctmc::{ChainMode, Ctmc, StatePartition};
use crate::error::{Error, Result};
use crate::lump::{LayerPartition, Lumping};
use crate::network::{validate, Activation, Layer, Network, Violation};
use crate::partition::Mode;

fn malformed(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Malformed { path: path.into(), message: message.into() }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| malformed("$", e.to_string()))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    match v {
        Value::Number(n) => {
            let x: f64 =
                n.to_string().parse().map_err(|_| malformed(path, format!("`{n}` is not a number")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::NonFinite { path: path.into() })
            }
        }
        other => Err(malformed(path, format!("expected a number, found {}", kind_of(other)))),
    }
}

fn kind_of(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| malformed(path, format!("expected an array, found {}", kind_of(v))))
}

fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    let map = obj
        .as_object()
        .ok_or_else(|| malformed(path, format!("expected an object, found {}", kind_of(obj))))?;
    map.get(key).ok_or_else(|| malformed(format!("{path}.{key}"), "missing field"))
}

fn number_array(v: &Value, path: &str) -> Result<Vec<f64>> {
    array(v, path)?.iter().enumerate().map(|(i, x)| number(x, &format!("{path}[{i}]"))).collect()
}

fn parse_activation(v: &Value, path: &str) -> Result<Activation> {
    let kind = field(v, "kind", path)?;
    let kind_path = format!("{path}.kind");
    match kind.as_str() {
        Some("relu") => Ok(Activation::Relu),
        Some("leaky_relu") => {
            let alpha = number(field(v, "alpha", path)?, &format!("{path}.alpha"))?;
            Ok(Activation::LeakyRelu { alpha })
        }
        Some(other) => {
            Err(malformed(kind_path, format!("unsupported activation `{other}` (expected relu|leaky_relu)")))
        }
        None => Err(malformed(kind_path, "expected a string")),
    }
}

fn violation_path(v: &Violation) -> String {
    match v {
        Violation::NoLayers => "layers".into(),
        Violation::WeightShape { layer, .. } => format!("layers[{}].weights", layer - 1),
        Violation::BiasLength { layer, .. } => format!("layers[{}].bias", layer - 1),
        Violation::Chain { layer, .. } => format!("layers[{}].weights", layer - 1),
        Violation::NonFiniteWeight { layer, from, to } => {
            format!("layers[{}].weights[{from}][{to}]", layer - 1)
        }
        Violation::NonFiniteBias { layer, index } => format!("layers[{}].bias[{index}]", layer - 1),
        Violation::BadAlpha { layer, .. } => format!("layers[{}].activation.alpha", layer - 1),
    }
}

pub fn parse_network(text: &str) -> Result<Network> {
    let doc = parse_value(text)?;
    let layers_v = array(field(&doc, "layers", "$")?, "layers")?;
    let mut layers = Vec::with_capacity(layers_v.len());
    for (idx, lv) in layers_v.iter().enumerate() {
        let base = format!("layers[{idx}]");
        let wpath = format!("{base}.weights");
        let rows = array(field(lv, "weights", &base)?, &wpath)?;
        let bias = number_array(field(lv, "bias", &base)?, &format!("{base}.bias"))?;
        let activation = parse_activation(field(lv, "activation", &base)?, &format!("{base}.activation"))?;
        let out_width = bias.len();
        let mut weights = Vec::with_capacity(rows.len() * out_width);
        for (i, row) in rows.iter().enumerate() {
            let rpath = format!("{wpath}[{i}]");
            let row = number_array(row, &rpath)?;
            if row.len() != out_width {
                return Err(malformed(
                    rpath,
                    format!("row has {} entries but bias has {out_width}", row.len()),
                ));
            }
            weights.extend(row);
        }
        layers.push(Layer::new(rows.len(), out_width, weights, bias, activation));
    }
    let net = Network::from_layers_unchecked(layers);
    if let Err(vs) = validate(&net) {
        let first = &vs[0];
        let msg = vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(match first {
            Violation::Chain { .. } => Error::ShapeChain(format!("{}: {msg}", violation_path(first))),
            Violation::NonFiniteWeight { .. } | Violation::NonFiniteBias { .. } => {
                Error::NonFinite { path: violation_path(first) }
            }
            _ => malformed(violation_path(first), msg),
        });
    }
    Ok(net)
}

pub fn load_network(path: &Path) -> Result<Network> {
    parse_network(&read_text(path)?)
}

fn fmt_num(x: f64) -> String {
    serde_json::to_string(&x).expect("finite f64 always serializes")
}

fn fmt_row(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| fmt_num(x)).collect();
    format!("[{}]", parts.join(", "))
}

/// Serialises a network with one weight row per line.
pub fn network_to_json(net: &Network) -> String {
    let mut out = String::from("{\n  \"layers\": [\n");
    for (idx, layer) in net.layers().iter().enumerate() {
        out.push_str("    {\n      \"weights\": [\n");
        for i in 0..layer.in_width() {
            let sep = if i + 1 < layer.in_width() { "," } else { "" };
            let _ = writeln!(out, "        {}{sep}", fmt_row(layer.row(i)));
        }
        out.push_str("      ],\n");
        let _ = writeln!(out, "      \"bias\": {},", fmt_row(layer.bias()));
        let act = match layer.activation() {
            Activation::Relu => "{\"kind\": \"relu\"}".to_string(),
            Activation::LeakyRelu { alpha } => {
                format!("{{\"kind\": \"leaky_relu\", \"alpha\": {}}}", fmt_num(alpha))
            }
        };
        let _ = writeln!(out, "      \"activation\": {act}");
        let sep = if idx + 1 < net.depth() { "," } else { "" };
        let _ = writeln!(out, "    }}{sep}");
    }
    out.push_str("  ]\n}\n");
    out
}

pub fn save_network(net: &Network, path: &Path) -> Result<()> {
    write_text(path, &network_to_json(net))
}

/// A valuation document is a bare array of numbers.
pub fn parse_valuation(text: &str) -> Result<Vec<f64>> {
    number_array(&parse_value(text)?, "$")
}

pub fn load_valuation(path: &Path) -> Result<Vec<f64>> {
    parse_valuation(&read_text(path)?)
}

pub fn valuation_to_json(v: &[f64]) -> String {
    format!("{}\n", fmt_row(v))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents always serialize");
    s.push('\n');
    s
}

pub fn from_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| malformed(what, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDocument {
    pub representative: usize,
    pub members: Vec<usize>,
    /// Scaling factor of each member, in `members` order.
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDocument {
    pub blocks: Vec<BlockDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpingDocument {
    pub mode: Mode,
    pub tol: f64,
    /// Layers `0..=k`.
    pub layers: Vec<LayerDocument>,
}

fn blocks_to_doc(blocks: &[Vec<usize>], rho: &[f64]) -> Vec<BlockDocument> {
    blocks
        .iter()
        .map(|b| BlockDocument {
            representative: b[0],
            members: b.clone(),
            rho: b.iter().map(|&m| rho[m]).collect(),
        })
        .collect()
}

/// Rebuilds blocks and a dense `rho` vector; errors on ragged or
/// out-of-range entries, leaving coverage checks to the caller.
fn blocks_from_doc(blocks: &[BlockDocument], path: &str) -> Result<(Vec<Vec<usize>>, Vec<f64>)> {
    let width = blocks.iter().flat_map(|b| b.members.iter().copied()).max().map_or(0, |m| m + 1);
    let mut rho = vec![f64::NAN; width];
    let mut out = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        if b.members.len() != b.rho.len() {
            return Err(malformed(format!("{path}.blocks[{i}]"), "members and rho differ in length"));
        }
        if b.members.first() != Some(&b.representative) {
            return Err(malformed(
                format!("{path}.blocks[{i}].representative"),
                "representative must be the first member",
            ));
        }
        for (&m, &r) in b.members.iter().zip(&b.rho) {
            rho[m] = r;
        }
        out.push(b.members.clone());
    }
    Ok((out, rho))
}

impl From<&Lumping> for LumpingDocument {
    fn from(l: &Lumping) -> Self {
        LumpingDocument {
            mode: l.mode,
            tol: l.tol,
            layers: l
                .layers()
                .iter()
                .zip(l.rhos())
                .map(|(p, r)| LayerDocument { blocks: blocks_to_doc(p.blocks(), r) })
                .collect(),
        }
    }
}

impl LumpingDocument {
    pub fn to_lumping(&self) -> Result<Lumping> {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut rhos = Vec::with_capacity(self.layers.len());
        for (l, doc) in self.layers.iter().enumerate() {
            let (blocks, rho) = blocks_from_doc(&doc.blocks, &format!("layers[{l}]"))?;
            layers.push(LayerPartition::from_blocks(blocks));
            rhos.push(rho);
        }
        Ok(Lumping::from_parts(self.mode, self.tol, layers, rhos))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDocument {
    pub n: usize,
    pub mode: ChainMode,
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&Ctmc> for ChainDocument {
    fn from(c: &Ctmc) -> Self {
        ChainDocument { n: c.len(), mode: c.mode(), edges: c.edges() }
    }
}

impl ChainDocument {
    pub fn to_chain(&self) -> Result<Ctmc> {
        Ctmc::from_edges(self.n, self.mode, &self.edges)
    }
}

pub fn parse_chain(text: &str) -> Result<Ctmc> {
    from_json::<ChainDocument>(text, "chain")?.to_chain()
}

pub fn chain_to_json(c: &Ctmc) -> String {
    let doc = ChainDocument::from(c);
    let mut out = format!(
        "{{\n  \"n\": {},\n  \"mode\": \"{}\",\n  \"edges\": [",
        doc.n,
        match doc.mode {
            ChainMode::Ctmc => "ctmc",
            ChainMode::Graph => "graph",
        }
    );
    for (i, (u, v, r)) in doc.edges.iter().enumerate() {
        let sep = if i == 0 { "\n" } else { ",\n" };
        let _ = write!(out, "{sep}    [{u}, {v}, {}]", fmt_num(*r));
    }
    if doc.edges.is_empty() {
        out.push_str("]\n}\n");
    } else {
        out.push_str("\n  ]\n}\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDocument {
    pub blocks: Vec<BlockDocument>,
}

impl From<&StatePartition> for PartitionDocument {
    fn from(p: &StatePartition) -> Self {
        PartitionDocument { blocks: blocks_to_doc(&p.blocks, &p.rho) }
    }
}

impl PartitionDocument {
    pub fn to_partition(&self) -> Result<StatePartition> {
        let (blocks, rho) = blocks_from_doc(&self.blocks, "partition")?;
        Ok(StatePartition { blocks, rho })
    }
}
