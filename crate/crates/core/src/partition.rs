//! Grouping of signature vectors by (positive) proportionality, shared by
//! the network and chain lumping code, plus set-partition enumeration for
//! the brute-force oracles.
//!
//! Tolerance discipline: a component counts as zero when
//! `|x| <= tol * (1 + scale)`, where `scale` is the largest magnitude over
//! all signatures being compared. A candidate `t` joins the block of
//! representative `r` when the ratio `c = t[p] / r[p]`, taken at the
//! largest-magnitude component `p` of `r`, is positive (or exactly 1 in
//! exact mode), the zero patterns agree, and
//! `max_i |t[i] / c - r[i]| <= tol * max_i |r[i]|`.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

/// Which lumping notion is being computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Signatures must be equal; every scaling factor is 1.
    Exact,
    /// Signatures must be positively proportional.
    Proportional,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Mode::Exact),
            "proportional" => Ok(Mode::Proportional),
            other => Err(format!("unknown mode `{other}` (expected exact|proportional)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Proportional => "proportional",
        })
    }
}

pub const DEFAULT_TOL: f64 = 1e-9;

/// Result of grouping: blocks of input positions (each ascending, blocks
/// ordered by their first element) and the scaling factor of every input,
/// equal to 1 on each block's first element.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub blocks: Vec<Vec<usize>>,
    pub rho: Vec<f64>,
}

pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Comparison rule used when grouping one family of signatures.
#[derive(Debug, Clone, Copy)]
pub struct Comparator {
    mode: Mode,
    tol: f64,
    zero: f64,
}

impl Comparator {
    /// `scale` is the largest component magnitude among all signatures
    /// that will be compared with this rule.
    pub fn new(mode: Mode, tol: f64, scale: f64) -> Self {
        Comparator { mode, tol, zero: tol * (1.0 + scale) }
    }

    pub fn is_zero(&self, x: f64) -> bool {
        x.abs() <= self.zero
    }

    pub fn is_zero_vector(&self, sig: &[f64]) -> bool {
        sig.iter().all(|&x| self.is_zero(x))
    }

    /// Ratio `c > 0` with `candidate ~ c * rep`, if the two match.
    pub fn ratio(&self, rep: &[f64], candidate: &[f64]) -> Option<f64> {
        debug_assert_eq!(rep.len(), candidate.len());
        let mut pivot = 0;
        let mut best = -1.0;
        for (i, &x) in rep.iter().enumerate() {
            if x.abs() > best {
                best = x.abs();
                pivot = i;
            }
        }
        let c = match self.mode {
            Mode::Exact => 1.0,
            Mode::Proportional => candidate[pivot] / rep[pivot],
        };
        if !(c.is_finite() && c > 0.0) {
            return None;
        }
        let bound = self.tol * best;
        for (&r, &t) in rep.iter().zip(candidate) {
            if self.is_zero(r) != self.is_zero(t) {
                return None;
            }
            if (t / c - r).abs() > bound {
                return None;
            }
        }
        Some(c)
    }
}

/// Fixed pseudo-random direction used to index signatures.
fn key_weight(i: usize) -> f64 {
    let g = ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract();
    2.0 * g - 1.0
}

/// Scalar index of a non-zero signature, invariant under positive scaling.
fn key(sig: &[f64]) -> f64 {
    let norm = sig.iter().map(|x| x * x).sum::<f64>().sqrt();
    sig.iter().enumerate().map(|(i, x)| key_weight(i) * (x / norm)).sum()
}

/// Groups `sigs` by scanning in ascending position and comparing each one
/// against the representatives created so far (first match wins).
///
/// Representatives are indexed by [`key`]; two signatures that pass
/// [`Comparator::ratio`] have unit-normalised forms within `2 sqrt(d) tol`
/// of each other in Euclidean norm, so their keys differ by at most
/// `2 d tol`. Only representatives inside that window are compared, which
/// keeps the scan close to linear without changing its outcome.
pub fn group(sigs: &[Vec<f64>], cmp: &Comparator) -> Grouping {
    let n = sigs.len();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut rho = vec![1.0; n];
    let mut zero_block: Option<usize> = None;
    let mut index: BTreeMap<OrderedFloat<f64>, Vec<usize>> = BTreeMap::new();
    let mut block_rep: Vec<usize> = Vec::new();

    let dim = sigs.first().map_or(0, Vec::len) as f64;
    let window = 2.0 * dim * cmp.tol + 64.0 * dim * f64::EPSILON;

    let mut candidates: Vec<usize> = Vec::new();
    for (i, sig) in sigs.iter().enumerate() {
        if cmp.is_zero_vector(sig) {
            match zero_block {
                Some(b) => blocks[b].push(i),
                None => {
                    zero_block = Some(blocks.len());
                    block_rep.push(i);
                    blocks.push(vec![i]);
                }
            }
            continue;
        }
        let k = key(sig);
        candidates.clear();
        for (_, bs) in index.range(OrderedFloat(k - window)..=OrderedFloat(k + window)) {
            candidates.extend_from_slice(bs);
        }
        candidates.sort_unstable();
        let mut joined = false;
        for &b in &candidates {
            let rep = block_rep[b];
            if let Some(c) = cmp.ratio(&sigs[rep], sig) {
                blocks[b].push(i);
                rho[i] = 1.0 / c;
                joined = true;
                break;
            }
        }
        if !joined {
            let b = blocks.len();
            block_rep.push(i);
            blocks.push(vec![i]);
            index.entry(OrderedFloat(k)).or_default().push(b);
        }
    }
    Grouping { blocks, rho }
}

/// Restricted-growth-string enumeration of all set partitions of
/// `{0, .., n-1}`. Each item maps element -> block label, labels in order
/// of first appearance.
pub struct SetPartitions {
    labels: Vec<usize>,
    maxes: Vec<usize>,
    done: bool,
}

impl SetPartitions {
    pub fn new(n: usize) -> Self {
        SetPartitions { labels: vec![0; n], maxes: vec![0; n], done: false }
    }
}

impl Iterator for SetPartitions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.labels.clone();
        let n = self.labels.len();
        // Advance: find the rightmost position that can still grow.
        let mut i = n;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            let limit = self.maxes[i - 1] + 1;
            if self.labels[i] < limit {
                self.labels[i] += 1;
                self.maxes[i] = self.maxes[i - 1].max(self.labels[i]);
                for j in i + 1..n {
                    self.labels[j] = 0;
                    self.maxes[j] = self.maxes[i];
                }
                break;
            }
        }
        Some(out)
    }
}

/// Converts a label vector into ascending blocks ordered by first element.
pub fn labels_to_blocks(labels: &[usize]) -> Vec<Vec<usize>> {
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut blocks = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        blocks[l].push(i);
    }
    blocks
}

/// Block label of every element.
pub fn block_labels(blocks: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut out = vec![usize::MAX; n];
    for (b, members) in blocks.iter().enumerate() {
        for &m in members {
            out[m] = b;
        }
    }
    out
}

/// `true` when every block of `fine` lies inside a block of `coarse`.
pub fn refines(fine: &[Vec<usize>], coarse: &[Vec<usize>], n: usize) -> bool {
    let labels = block_labels(coarse, n);
    fine.iter().all(|b| b.iter().all(|&m| labels[m] == labels[b[0]]))
}
