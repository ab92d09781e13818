//! Construction of the reduced network from a valid lumping.
//!
//! For blocks `[u]` of layer `l - 1` and `[v]` of layer `l`, with `u` and
//! `v` the block representatives:
//!
//! ```text
//! W'([u], [v]) = rho(u) * sum_{w in [u]} W(w, v) / rho(w)
//! b'([v])      = b(v)
//! ```
//!
//! The merged neuron keeps the representative's valuation; every other
//! member `w` satisfies `Val(w) = rho(u) / rho(w) * Val(u)`, which is what
//! the weighted sum folds into the outgoing edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lump::{check_lumpability, Lumping};
use crate::network::{Layer, Network};

/// Which member of each block stands in for it in the reduced network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepresentativeRule {
    #[default]
    Smallest,
    Largest,
}

impl RepresentativeRule {
    fn pick(self, block: &[usize]) -> usize {
        match self {
            RepresentativeRule::Smallest => block[0],
            RepresentativeRule::Largest => block[block.len() - 1],
        }
    }
}

/// Builds the reduced network, rejecting lumpings that fail
/// [`check_lumpability`] at the lumping's own tolerance.
pub fn reduce(net: &Network, lump: &Lumping) -> Result<Network> {
    reduce_with(net, lump, RepresentativeRule::Smallest)
}

pub fn reduce_with(net: &Network, lump: &Lumping, rule: RepresentativeRule) -> Result<Network> {
    check_lumpability(net, lump, lump.tol).map_err(|e| Error::InvalidLumping(e.to_string()))?;

    let mut layers = Vec::with_capacity(net.depth());
    for l in 1..=net.depth() {
        let layer = net.layer(l);
        let src = lump.layer(l - 1);
        let dst = lump.layer(l);
        let src_rho = lump.rho(l - 1);
        let reps: Vec<usize> = dst.blocks().iter().map(|b| rule.pick(b)).collect();

        let mut weights = Vec::with_capacity(src.len() * dst.len());
        for block in src.blocks() {
            let u = rule.pick(block);
            for &v in &reps {
                let mut sum = 0.0;
                for &w in block {
                    sum += layer.weight(w, v) / src_rho[w];
                }
                weights.push(src_rho[u] * sum);
            }
        }
        let bias = reps.iter().map(|&v| layer.bias()[v]).collect();
        layers.push(Layer::new(src.len(), dst.len(), weights, bias, layer.activation()));
    }
    Network::new(layers)
}

/// Size bookkeeping for one reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub widths_before: Vec<usize>,
    pub widths_after: Vec<usize>,
    /// Neurons removed per layer, `0..=k`.
    pub merged_per_layer: Vec<usize>,
    pub neurons_removed: usize,
    pub parameters_before: usize,
    pub parameters_after: usize,
    /// Blocks with more than one member, per layer.
    pub nontrivial_blocks_per_layer: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detection_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub construction_seconds: Option<f64>,
}

pub fn reduction_report(before: &Network, after: &Network, lump: &Lumping) -> ReductionReport {
    let widths_before = before.widths();
    let widths_after = after.widths();
    let merged_per_layer: Vec<usize> = widths_before.iter().zip(&widths_after).map(|(b, a)| b - a).collect();
    ReductionReport {
        neurons_removed: merged_per_layer.iter().sum(),
        merged_per_layer,
        widths_before,
        widths_after,
        parameters_before: before.parameter_count(),
        parameters_after: after.parameter_count(),
        nontrivial_blocks_per_layer: lump
            .layers()
            .iter()
            .map(|p| p.blocks().iter().filter(|b| b.len() > 1).count())
            .collect(),
        detection_seconds: None,
        construction_seconds: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lump::{max_lumpability, LayerPartition};
    use crate::network::{forward, Activation};
    use crate::partition::Mode;

    fn relu(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Layer {
        Layer::from_rows(rows, bias, Activation::Relu)
    }

    #[test]
    fn identity_lumping_reproduces_the_network() {
        let net = Network::new(vec![
            relu(vec![vec![0.3, -1.1, 0.7], vec![2.5, 0.1, -0.4]], vec![0.1, 0.2, 0.3]),
            relu(vec![vec![1.0, -2.0], vec![0.5, 0.25], vec![-3.0, 1.5]], vec![0.0, -0.1]),
        ])
        .unwrap();
        let lump = crate::lump::Lumping::identity(&net, Mode::Proportional, 1e-9);
        let reduced = reduce(&net, &lump).unwrap();
        assert_eq!(reduced, net);
        let report = reduction_report(&net, &reduced, &lump);
        assert_eq!(report.neurons_removed, 0);
        assert_eq!(report.parameters_before, report.parameters_after);
    }

    #[test]
    fn proportional_pair_folds_downstream_weights() {
        // x -> a = x, b = 2x; z = 3a + 4b = 11a.
        let net = Network::new(vec![
            relu(vec![vec![1.0, 2.0]], vec![0.0, 0.0]),
            relu(vec![vec![3.0], vec![4.0]], vec![0.0]),
        ])
        .unwrap();
        let lump = crate::lump::Lumping::from_parts(
            Mode::Proportional,
            1e-9,
            vec![
                LayerPartition::identity(1),
                LayerPartition::from_blocks(vec![vec![0, 1]]),
                LayerPartition::identity(1),
            ],
            vec![vec![1.0], vec![1.0, 0.5], vec![1.0]],
        );
        let reduced = reduce(&net, &lump).unwrap();
        assert_eq!(reduced.layer(1).weights(), &[1.0]);
        assert_eq!(reduced.layer(2).weights(), &[11.0]);
        for x in [-1.0, 0.25, 3.0] {
            assert_eq!(forward(&net, &[x]).unwrap(), forward(&reduced, &[x]).unwrap());
        }
    }

    #[test]
    fn exact_duplicates_sum_outgoing_weights() {
        let (w1, w2) = (0.75, -1.25);
        let net = Network::new(vec![
            relu(vec![vec![0.4, 0.4]], vec![0.1, 0.1]),
            relu(vec![vec![w1], vec![w2]], vec![0.0]),
        ])
        .unwrap();
        let lump = max_lumpability(&net, Mode::Exact, 1e-9);
        let reduced = reduce(&net, &lump).unwrap();
        assert_eq!(reduced.layer(2).weights(), &[w1 + w2]);
    }

    #[test]
    fn report_counts_one_merge() {
        let mut rows = vec![
            (0..8).map(|j| 0.1 * (j as f64 + 1.0)).collect::<Vec<_>>(),
            (0..8).map(|j| -0.3 + 0.17 * j as f64).collect(),
        ];
        rows[0][5] = 2.0 * rows[0][2];
        rows[1][5] = 2.0 * rows[1][2];
        let mut bias: Vec<f64> = (0..8).map(|j| 0.05 * j as f64 - 0.2).collect();
        bias[5] = 2.0 * bias[2];
        let net = Network::new(vec![relu(rows, bias), relu(vec![vec![1.0]; 8], vec![0.0])]).unwrap();
        let lump = max_lumpability(&net, Mode::Proportional, 1e-9);
        let reduced = reduce(&net, &lump).unwrap();
        let report = reduction_report(&net, &reduced, &lump);
        assert_eq!(report.widths_after, vec![2, 7, 1]);
        assert_eq!(report.merged_per_layer, vec![0, 1, 0]);
        assert_eq!(report.parameters_before, 2 * 8 + 8 + 8 + 1);
        assert_eq!(report.parameters_after, 2 * 7 + 7 + 7 + 1);
    }

    #[test]
    fn invalid_lumping_is_rejected() {
        let net = Network::new(vec![
            relu(vec![vec![1.0, 3.0]], vec![0.0, 0.0]),
            relu(vec![vec![3.0], vec![4.0]], vec![0.0]),
        ])
        .unwrap();
        let lump = crate::lump::Lumping::from_parts(
            Mode::Proportional,
            1e-9,
            vec![
                LayerPartition::identity(1),
                LayerPartition::from_blocks(vec![vec![0, 1]]),
                LayerPartition::identity(1),
            ],
            vec![vec![1.0], vec![1.0, 0.5], vec![1.0]],
        );
        assert!(matches!(reduce(&net, &lump), Err(Error::InvalidLumping(_))));
    }

    #[test]
    fn largest_representative_preserves_outputs() {
        let net = Network::new(vec![
            relu(vec![vec![1.0, 0.5, -2.0], vec![-0.5, -0.25, 1.0]], vec![0.2, 0.1, -0.4]),
            relu(vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.7, 0.7]], vec![0.0, 0.1]),
            relu(vec![vec![1.0], vec![1.0]], vec![0.0]),
        ])
        .unwrap();
        let lump = max_lumpability(&net, Mode::Proportional, 1e-9);
        assert_eq!(lump.layer(1).blocks(), &[vec![0, 1], vec![2]]);
        let small = reduce_with(&net, &lump, RepresentativeRule::Smallest).unwrap();
        let large = reduce_with(&net, &lump, RepresentativeRule::Largest).unwrap();
        assert_ne!(small, large);
        for x in [[0.3, -0.9], [-1.0, 1.0], [0.5, 0.5]] {
            let a = forward(&small, &x).unwrap();
            let b = forward(&large, &x).unwrap();
            let c = forward(&net, &x).unwrap();
            for ((a, b), c) in a.iter().zip(&b).zip(&c) {
                assert!((a - c).abs() <= 1e-12 && (b - c).abs() <= 1e-12);
            }
        }
    }
}
