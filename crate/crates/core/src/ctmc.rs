//! Exact and proportional exact lumpability on continuous-time Markov
//! chains and unconstrained labelled graphs.
//!
//! A partition with positive `rho` is a proportional exact lumpability when
//! for all blocks `S`, `S'` and all `v, t` in `S`:
//!
//! ```text
//! rho(v) * sum_{u in S'} Q(u, v) = rho(t) * sum_{u in S'} Q(u, t)
//! ```
//!
//! Sums range over off-diagonal rates only (`u != v`). In chain mode the
//! diagonal is the negated exit rate and would otherwise make the exit
//! rates part of the condition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{self, max_abs, Comparator, Mode, SetPartitions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    /// Non-negative off-diagonal rates, diagonal = -(row sum).
    Ctmc,
    /// No constraints on the rates.
    Graph,
}

impl std::str::FromStr for ChainMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ctmc" => Ok(ChainMode::Ctmc),
            "graph" => Ok(ChainMode::Graph),
            other => Err(format!("unknown chain mode `{other}` (expected ctmc|graph)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    n: usize,
    /// Dense row-major `n x n` rate matrix.
    q: Vec<f64>,
    mode: ChainMode,
}

impl Ctmc {
    /// Wraps a dense rate matrix as given, diagonal included.
    pub fn from_matrix(n: usize, q: Vec<f64>, mode: ChainMode) -> Result<Self> {
        if q.len() != n * n {
            return Err(Error::InvalidChain(format!(
                "rate matrix has {} entries, expected {}",
                q.len(),
                n * n
            )));
        }
        Ok(Ctmc { n, q, mode })
    }

    /// Builds a chain from off-diagonal edges. In chain mode the diagonal is
    /// derived as the negated row sum; in graph mode it is zero.
    pub fn from_edges(n: usize, mode: ChainMode, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut q = vec![0.0; n * n];
        let mut seen = vec![false; n * n];
        for &(u, v, r) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidChain(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::InvalidChain(format!("self-loop on state {u}")));
            }
            if seen[u * n + v] {
                return Err(Error::InvalidChain(format!("duplicate edge ({u}, {v})")));
            }
            if !r.is_finite() {
                return Err(Error::InvalidChain(format!("edge ({u}, {v}) has non-finite rate")));
            }
            seen[u * n + v] = true;
            q[u * n + v] = r;
        }
        if mode == ChainMode::Ctmc {
            for u in 0..n {
                let exit: f64 = (0..n).filter(|&v| v != u).map(|v| q[u * n + v]).sum();
                q[u * n + u] = -exit;
            }
        }
        Ok(Ctmc { n, q, mode })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mode(&self) -> ChainMode {
        self.mode
    }

    #[inline]
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.q[from * self.n + to]
    }

    /// Non-zero off-diagonal rates in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                let r = self.rate(u, v);
                if u != v && r != 0.0 {
                    out.push((u, v, r));
                }
            }
        }
        out
    }

    /// Per-state signature: off-diagonal incoming rate sums from each block.
    pub fn signatures(&self, blocks: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let mut sigs = vec![vec![0.0; blocks.len()]; self.n];
        for (b, members) in blocks.iter().enumerate() {
            for &u in members {
                for (v, sig) in sigs.iter_mut().enumerate() {
                    if u != v {
                        sig[b] += self.rate(u, v);
                    }
                }
            }
        }
        sigs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainViolation {
    NonFinite { from: usize, to: usize },
    NegativeRate { from: usize, to: usize, rate: f64 },
    RowSum { state: usize, diagonal: f64, expected: f64 },
}

impl fmt::Display for ChainViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainViolation::NonFinite { from, to } => {
                write!(f, "rate ({from}, {to}) is not finite")
            }
            ChainViolation::NegativeRate { from, to, rate } => {
                write!(f, "rate ({from}, {to}) = {rate} is negative")
            }
            ChainViolation::RowSum { state, diagonal, expected } => {
                write!(f, "state {state}: diagonal {diagonal} != -(exit rate) {expected}")
            }
        }
    }
}

pub fn validate_ctmc(c: &Ctmc) -> std::result::Result<(), Vec<ChainViolation>> {
    let n = c.n;
    let mut out = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if !c.rate(u, v).is_finite() {
                out.push(ChainViolation::NonFinite { from: u, to: v });
            }
        }
    }
    if c.mode == ChainMode::Ctmc && out.is_empty() {
        for u in 0..n {
            let mut exit = 0.0;
            for v in (0..n).filter(|&v| v != u) {
                let r = c.rate(u, v);
                if r < 0.0 {
                    out.push(ChainViolation::NegativeRate { from: u, to: v, rate: r });
                }
                exit += r;
            }
            let d = c.rate(u, u);
            if (d + exit).abs() > 1e-9 * (1.0 + exit.abs()) {
                out.push(ChainViolation::RowSum { state: u, diagonal: d, expected: -exit });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Blocks over states (ascending, ordered by first member) and a positive
/// scaling factor per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePartition {
    pub blocks: Vec<Vec<usize>>,
    pub rho: Vec<f64>,
}

impl StatePartition {
    pub fn identity(n: usize) -> Self {
        StatePartition { blocks: (0..n).map(|i| vec![i]).collect(), rho: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLumpViolation {
    pub block: usize,
    pub source_block: usize,
    pub representative: usize,
    pub state: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainCheckError {
    Shape(String),
    Violations(Vec<ChainLumpViolation>),
}

impl fmt::Display for ChainCheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainCheckError::Shape(m) => write!(f, "partition shape mismatch: {m}"),
            ChainCheckError::Violations(vs) => {
                write!(f, "{} lumpability equation(s) violated", vs.len())?;
                if let Some(v) = vs.first() {
                    write!(
                        f,
                        "; first: block {} from block {}: states ({}, {}) give {} vs {}",
                        v.block, v.source_block, v.representative, v.state, v.lhs, v.rhs
                    )?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ChainCheckError {}

fn check_partition_shape(n: usize, p: &StatePartition) -> std::result::Result<(), String> {
    if p.rho.len() != n {
        return Err(format!("rho has length {}, expected {n}", p.rho.len()));
    }
    let mut seen = vec![false; n];
    for (b, members) in p.blocks.iter().enumerate() {
        if members.is_empty() {
            return Err(format!("block {b} is empty"));
        }
        for &m in members {
            if m >= n {
                return Err(format!("state {m} out of range"));
            }
            if seen[m] {
                return Err(format!("state {m} appears twice"));
            }
            seen[m] = true;
        }
    }
    if let Some(m) = seen.iter().position(|s| !s) {
        return Err(format!("state {m} not covered"));
    }
    if let Some(i) = p.rho.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(format!("rho({i}) = {} is not positive", p.rho[i]));
    }
    Ok(())
}

/// Checks every `(S, S', v, t)` instance against the block's first member,
/// with absolute threshold `2 tol (1 + m)`, `m` the largest
/// `|rho(v) sum|` over all states. With `rho == 1` this is plain exact
/// lumpability.
pub fn check_prop_exact(c: &Ctmc, p: &StatePartition, tol: f64) -> std::result::Result<(), ChainCheckError> {
    check_partition_shape(c.n, p).map_err(ChainCheckError::Shape)?;
    let sigs = c.signatures(&p.blocks);
    let scaled: Vec<Vec<f64>> =
        sigs.iter().zip(&p.rho).map(|(s, &r)| s.iter().map(|x| r * x).collect()).collect();
    let scale = scaled.iter().map(|s| max_abs(s)).fold(0.0, f64::max);
    let thr = 2.0 * tol * (1.0 + scale);
    let mut violations = Vec::new();
    for (b, members) in p.blocks.iter().enumerate() {
        let rep = members[0];
        for &t in &members[1..] {
            for (sb, (&lhs, &rhs)) in scaled[t].iter().zip(&scaled[rep]).enumerate() {
                if (lhs - rhs).abs() > thr {
                    violations.push(ChainLumpViolation {
                        block: b,
                        source_block: sb,
                        representative: rep,
                        state: t,
                        lhs,
                        rhs,
                    });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ChainCheckError::Violations(violations))
    }
}

/// Outcome of backward refinement, with the block structure after every
/// round (round 0 is the single block).
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub partition: StatePartition,
    pub rounds: Vec<Vec<Vec<usize>>>,
}

/// Maximum lumpability by backward signature splitting: start from one
/// block, split every block by its members' incoming sums over the current
/// blocks, stop when nothing splits. The result is re-verified with
/// [`check_prop_exact`].
pub fn max_prop_exact(c: &Ctmc, mode: Mode, tol: f64) -> Result<StatePartition> {
    max_prop_exact_traced(c, mode, tol).map(|r| r.partition)
}

pub fn max_prop_exact_traced(c: &Ctmc, mode: Mode, tol: f64) -> Result<Refinement> {
    let n = c.n;
    if n == 0 {
        return Ok(Refinement {
            partition: StatePartition { blocks: vec![], rho: vec![] },
            rounds: vec![vec![]],
        });
    }
    let mut blocks: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut rho = vec![1.0; n];
    let mut rounds = vec![blocks.clone()];
    loop {
        let sigs = c.signatures(&blocks);
        let scale = sigs.iter().map(|s| max_abs(s)).fold(0.0, f64::max);
        let cmp = Comparator::new(mode, tol, scale);
        let mut next = Vec::with_capacity(blocks.len());
        for members in &blocks {
            let local: Vec<Vec<f64>> = members.iter().map(|&s| sigs[s].clone()).collect();
            let g = partition::group(&local, &cmp);
            for sub in g.blocks {
                next.push(sub.iter().map(|&i| members[i]).collect::<Vec<_>>());
            }
            for (i, &s) in members.iter().enumerate() {
                rho[s] = g.rho[i];
            }
        }
        next.sort_by_key(|b| b[0]);
        let stable = next.len() == blocks.len();
        blocks = next;
        if stable {
            break;
        }
        rounds.push(blocks.clone());
        if rounds.len() > n {
            return Err(Error::Internal("refinement did not stabilise within n rounds".into()));
        }
    }
    let partition = StatePartition { blocks, rho };
    check_prop_exact(c, &partition, tol)
        .map_err(|e| Error::Internal(format!("refined partition failed verification: {e}")))?;
    Ok(Refinement { partition, rounds })
}

/// Quotient graph: one state per block (representative = first member),
/// `Q'([u], [v]) = rho(u) * sum_{w in [u]} Q(w, v) / rho(w)` between
/// distinct blocks. Rates inside a block are dropped. The result is in
/// graph mode.
pub fn quotient_ctmc(c: &Ctmc, p: &StatePartition, tol: f64) -> Result<Ctmc> {
    check_prop_exact(c, p, tol).map_err(|e| Error::InvalidChain(e.to_string()))?;
    let m = p.blocks.len();
    let mut q = vec![0.0; m * m];
    for (bu, src) in p.blocks.iter().enumerate() {
        let u = src[0];
        for (bv, dst) in p.blocks.iter().enumerate() {
            if bu == bv {
                continue;
            }
            let v = dst[0];
            let mut sum = 0.0;
            for &w in src {
                sum += c.rate(w, v) / p.rho[w];
            }
            q[bu * m + bv] = p.rho[u] * sum;
        }
    }
    Ctmc::from_matrix(m, q, ChainMode::Graph)
}

/// Largest state count accepted by [`brute_force_max`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Solves `rho` for a candidate partition by ratio propagation from the
/// first non-zero signature component of each block's first member.
/// `None` when some member cannot be matched with a positive ratio.
fn solve_rho(c: &Ctmc, blocks: &[Vec<usize>], mode: Mode, tol: f64) -> Option<Vec<f64>> {
    let mut rho = vec![1.0; c.n];
    if mode == Mode::Exact {
        return Some(rho);
    }
    let sigs = c.signatures(blocks);
    let scale = sigs.iter().map(|s| max_abs(s)).fold(0.0, f64::max);
    let zero = tol * (1.0 + scale);
    for members in blocks {
        let rep = &sigs[members[0]];
        let Some(j) = rep.iter().position(|x| x.abs() > zero) else {
            continue;
        };
        for &t in &members[1..] {
            let r = rep[j] / sigs[t][j];
            if !(r.is_finite() && r > 0.0) {
                return None;
            }
            rho[t] = r;
        }
    }
    Some(rho)
}

/// Enumerates every set partition of the states, keeps those that pass
/// [`check_prop_exact`] with `rho` from ratio propagation, and returns the
/// unique maximal one. Two incomparable maximal partitions are reported as
/// an internal error.
pub fn brute_force_max(c: &Ctmc, mode: Mode, tol: f64) -> Result<StatePartition> {
    if c.n > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidChain(format!(
            "brute force supports at most {BRUTE_FORCE_LIMIT} states, got {}",
            c.n
        )));
    }
    let mut valid: Vec<StatePartition> = Vec::new();
    for labels in SetPartitions::new(c.n) {
        let blocks = partition::labels_to_blocks(&labels);
        let Some(rho) = solve_rho(c, &blocks, mode, tol) else {
            continue;
        };
        let candidate = StatePartition { blocks, rho };
        if check_prop_exact(c, &candidate, tol).is_ok() {
            valid.push(candidate);
        }
    }
    valid.sort_by_key(StatePartition::len);
    let mut maximal: Vec<StatePartition> = Vec::new();
    for p in valid {
        if !maximal.iter().any(|m| partition::refines(&p.blocks, &m.blocks, c.n)) {
            maximal.push(p);
        }
    }
    match maximal.len() {
        1 => Ok(maximal.pop().unwrap()),
        0 => Err(Error::Internal("no valid partition found".into())),
        k => Err(Error::Internal(format!("{k} incomparable maximal partitions"))),
    }
}
