//! Elimination of neurons whose signature is a positive linear combination
//! of other neurons' signatures in the same layer.
//!
//! If `sig(t) = sum_i c_i sig(v_i)` with every `c_i > 0`, then the
//! pre-activation of `t` is `sum_i c_i y_i` where `y_i` are the donors'
//! pre-activations. Removing `t` and adding `c_i W(t, z)` to each donor's
//! outgoing edge is exact on an input precisely when
//! `act(sum_i c_i y_i) = sum_i c_i act(y_i)`, i.e. when all `y_i` share a
//! sign. [`sign_condition_rate`] measures how often that holds.
//!
//! Signatures here are the raw incoming weights plus bias; the previous
//! layer is treated as all singletons.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{forward_trace, Layer, Network};
use crate::partition::max_abs;
use crate::sampling;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub layer: usize,
    pub neuron: usize,
    /// `(donor, coefficient)`, donors ascending, coefficients positive.
    pub donors: Vec<(usize, f64)>,
    /// `max |sig(t) - sum c_i sig(v_i)| / max |sig(t)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReport {
    pub layer: usize,
    pub neuron: usize,
    /// Fraction of sampled inputs on which every donor pre-activation is
    /// `>= 0`, or every one is `<= 0`.
    pub fraction: f64,
    pub samples: usize,
    pub seed: u64,
}

/// `[b(v), W(0, v), .., W(m-1, v)]` for every neuron of layer `l`.
pub fn raw_signatures(layer: &Layer) -> Vec<Vec<f64>> {
    (0..layer.out_width())
        .map(|v| {
            let mut sig = Vec::with_capacity(layer.in_width() + 1);
            sig.push(layer.bias()[v]);
            sig.extend((0..layer.in_width()).map(|u| layer.weight(u, v)));
            sig
        })
        .collect()
}

/// Solves the square system `a x = b` (row-major `n x n`) by Gaussian
/// elimination with partial pivoting. `None` when numerically singular.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = max_abs(&a).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    Some(x)
}

/// Unconstrained least squares `min || sum_i c_i cols[i] - target ||` via
/// the normal equations (the column sets here have at most a handful of
/// members).
fn least_squares(cols: &[&[f64]], target: &[f64]) -> Option<Vec<f64>> {
    let n = cols.len();
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            let g: f64 = cols[i].iter().zip(cols[j]).map(|(a, b)| a * b).sum();
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
        rhs[i] = cols[i].iter().zip(target).map(|(a, b)| a * b).sum();
    }
    solve_dense(gram, rhs, n)
}

fn relative_residual(cols: &[&[f64]], coeffs: &[f64], target: &[f64]) -> f64 {
    let norm = max_abs(target);
    let mut worst = 0.0_f64;
    for (k, &y) in target.iter().enumerate() {
        let fit: f64 = cols.iter().zip(coeffs).map(|(c, w)| w * c[k]).sum();
        worst = worst.max((y - fit).abs());
    }
    worst / norm
}

/// Active-set positive fit: solve unconstrained, drop every coefficient
/// `<= min_coeff`, re-solve on the survivors, repeat. Returns the
/// surviving `(position, coefficient)` pairs and the relative residual.
pub fn positive_fit(cols: &[&[f64]], target: &[f64], min_coeff: f64) -> Option<(Vec<(usize, f64)>, f64)> {
    let mut active: Vec<usize> = (0..cols.len()).collect();
    while !active.is_empty() {
        let sub: Vec<&[f64]> = active.iter().map(|&i| cols[i]).collect();
        let coeffs = least_squares(&sub, target)?;
        if coeffs.iter().all(|&c| c > min_coeff) {
            let residual = relative_residual(&sub, &coeffs, target);
            return Some((active.into_iter().zip(coeffs).collect(), residual));
        }
        active = active.into_iter().zip(&coeffs).filter(|(_, &c)| c > min_coeff).map(|(i, _)| i).collect();
    }
    None
}

/// Greedy first-fit search for positive combinations in layer `l`.
///
/// Candidates are scanned in ascending index. For each one, donor sets of
/// size `1, 2, .., k_max` are drawn from earlier neurons that have not been
/// eliminated (and whose signature is non-zero), in lexicographic order;
/// the first set admitting a positive fit with relative residual `<= tol`
/// and every coefficient `> tol` wins. Eliminated neurons never act as
/// donors later. The search visits `O(n^k_max)` donor sets per candidate.
pub fn find_linear_dependencies(net: &Network, l: usize, k_max: usize, tol: f64) -> Result<Vec<Elimination>> {
    if l == 0 || l >= net.depth() {
        return Err(Error::InvalidElimination(format!(
            "layer {l} is not a hidden layer (depth {})",
            net.depth()
        )));
    }
    if k_max < 2 {
        return Err(Error::InvalidElimination(format!("k_max must be >= 2, got {k_max}")));
    }
    let sigs = raw_signatures(net.layer(l));
    let scale = sigs.iter().map(|s| max_abs(s)).fold(0.0, f64::max);
    let zero = tol * (1.0 + scale);
    let nonzero: Vec<bool> = sigs.iter().map(|s| max_abs(s) > zero).collect();

    let mut eliminated = vec![false; sigs.len()];
    let mut out = Vec::new();
    for t in 0..sigs.len() {
        if !nonzero[t] {
            continue;
        }
        let pool: Vec<usize> = (0..t).filter(|&v| !eliminated[v] && nonzero[v]).collect();
        let mut found = None;
        'sizes: for size in 1..=k_max.min(pool.len()) {
            for donors in pool.iter().copied().combinations(size) {
                let cols: Vec<&[f64]> = donors.iter().map(|&v| sigs[v].as_slice()).collect();
                if let Some((fit, residual)) = positive_fit(&cols, &sigs[t], tol) {
                    if residual <= tol {
                        found = Some((fit.into_iter().map(|(i, c)| (donors[i], c)).collect(), residual));
                        break 'sizes;
                    }
                }
            }
        }
        if let Some((donors, residual)) = found {
            eliminated[t] = true;
            out.push(Elimination { layer: l, neuron: t, donors, residual });
        }
    }
    Ok(out)
}

/// Removes every eliminated neuron, folding `c_i W(t, z)` into each donor's
/// outgoing weights.
pub fn eliminate(net: &Network, elims: &[Elimination]) -> Result<Network> {
    let k = net.depth();
    let mut removed: Vec<Vec<bool>> = net.widths().iter().map(|&w| vec![false; w]).collect();
    for e in elims {
        if e.layer == 0 || e.layer >= k {
            return Err(Error::InvalidElimination(format!("layer {} is not hidden", e.layer)));
        }
        let width = net.width(e.layer);
        if e.neuron >= width {
            return Err(Error::InvalidElimination(format!(
                "neuron {} out of range in layer {}",
                e.neuron, e.layer
            )));
        }
        if removed[e.layer][e.neuron] {
            return Err(Error::InvalidElimination(format!(
                "neuron {} of layer {} eliminated twice",
                e.neuron, e.layer
            )));
        }
        removed[e.layer][e.neuron] = true;
    }
    for e in elims {
        if e.donors.is_empty() {
            return Err(Error::InvalidElimination(format!("neuron {} has no donors", e.neuron)));
        }
        for &(v, c) in &e.donors {
            if v >= net.width(e.layer) || v == e.neuron {
                return Err(Error::InvalidElimination(format!(
                    "bad donor {v} for neuron {} in layer {}",
                    e.neuron, e.layer
                )));
            }
            if removed[e.layer][v] {
                return Err(Error::InvalidElimination(format!(
                    "donor {v} of neuron {} is itself eliminated",
                    e.neuron
                )));
            }
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidElimination(format!(
                    "coefficient {c} for donor {v} is not positive"
                )));
            }
        }
    }

    let mut layers: Vec<Layer> = net.layers().to_vec();
    for e in elims {
        let next = &mut layers[e.layer];
        for &(v, c) in &e.donors {
            for z in 0..next.out_width() {
                let w = next.weight(e.neuron, z);
                *next.weight_mut(v, z) += c * w;
            }
        }
    }

    let rebuilt = layers
        .iter()
        .enumerate()
        .map(|(idx, layer)| {
            let l = idx + 1;
            let keep_in: Vec<usize> = (0..layer.in_width()).filter(|&i| !removed[l - 1][i]).collect();
            let keep_out: Vec<usize> = (0..layer.out_width()).filter(|&j| !removed[l][j]).collect();
            let mut weights = Vec::with_capacity(keep_in.len() * keep_out.len());
            for &i in &keep_in {
                for &j in &keep_out {
                    weights.push(layer.weight(i, j));
                }
            }
            let bias = keep_out.iter().map(|&j| layer.bias()[j]).collect();
            Layer::new(keep_in.len(), keep_out.len(), weights, bias, layer.activation())
        })
        .collect();
    Network::new(rebuilt)
}

/// `true` when all values are `>= 0` or all are `<= 0`.
pub fn same_sign(values: impl IntoIterator<Item = f64>) -> bool {
    let (mut pos, mut neg) = (false, false);
    for y in values {
        pos |= y > 0.0;
        neg |= y < 0.0;
    }
    !(pos && neg)
}

/// Fraction of seeded uniform inputs on which the donors of `elim` share a
/// pre-activation sign.
pub fn sign_condition_rate(
    net: &Network,
    elim: &Elimination,
    samples: usize,
    seed: u64,
) -> Result<SignReport> {
    if elim.layer == 0 || elim.layer > net.depth() {
        return Err(Error::InvalidElimination(format!("layer {} out of range", elim.layer)));
    }
    let width = net.width(elim.layer);
    if let Some(&(v, _)) = elim.donors.iter().find(|(v, _)| *v >= width) {
        return Err(Error::InvalidElimination(format!("donor {v} out of range")));
    }
    let inputs = sampling::uniform_inputs(seed, samples, net.input_width());
    let mut hits = 0usize;
    for x in &inputs {
        let trace = forward_trace(net, x)?;
        let pre = trace.pre(elim.layer);
        if same_sign(elim.donors.iter().map(|&(v, _)| pre[v])) {
            hits += 1;
        }
    }
    Ok(SignReport {
        layer: elim.layer,
        neuron: elim.neuron,
        fraction: if samples == 0 { 1.0 } else { hits as f64 / samples as f64 },
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, Activation};

    fn relu(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Layer {
        Layer::from_rows(rows, bias, Activation::Relu)
    }

    /// Two inputs, hidden layer given by columns `cols` and biases, one
    /// output reading every hidden neuron with weights `out`.
    fn net_from_columns(cols: &[[f64; 2]], bias: &[f64], out: &[f64]) -> Network {
        let rows = (0..2).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Network::new(vec![relu(rows, bias.to_vec()), relu(out.iter().map(|&w| vec![w]).collect(), vec![0.0])])
            .unwrap()
    }

    #[test]
    fn proportional_is_a_one_donor_combination() {
        let net = net_from_columns(&[[0.5, -1.0], [1.0, -2.0]], &[0.25, 0.5], &[3.0, 4.0]);
        let elims = find_linear_dependencies(&net, 1, 2, 1e-9).unwrap();
        assert_eq!(elims.len(), 1);
        assert_eq!(elims[0].neuron, 1);
        assert_eq!(elims[0].donors.len(), 1);
        assert_eq!(elims[0].donors[0].0, 0);
        assert!((elims[0].donors[0].1 - 2.0).abs() < 1e-12);
        assert_eq!(elims[0].residual, 0.0);
    }

    #[test]
    fn two_donor_combination_is_recovered() {
        let v1 = [1.0, 0.2];
        let v2 = [-0.3, 0.9];
        let (b1, b2) = (0.1, -0.4);
        let t = [0.5 * v1[0] + 1.5 * v2[0], 0.5 * v1[1] + 1.5 * v2[1]];
        let net = net_from_columns(&[v1, v2, t], &[b1, b2, 0.5 * b1 + 1.5 * b2], &[1.0, 1.0, 1.0]);
        let elims = find_linear_dependencies(&net, 1, 2, 1e-9).unwrap();
        assert_eq!(elims.len(), 1);
        let e = &elims[0];
        assert_eq!(e.neuron, 2);
        assert_eq!(e.donors.len(), 2);
        assert_eq!((e.donors[0].0, e.donors[1].0), (0, 1));
        assert!((e.donors[0].1 - 0.5).abs() < 1e-6);
        assert!((e.donors[1].1 - 1.5).abs() < 1e-6);
        assert!(e.residual <= 1e-9);
    }

    #[test]
    fn negative_coefficient_is_not_eliminated() {
        let v1 = [1.0, 0.2];
        let v2 = [-0.3, 0.9];
        let t = [v1[0] - v2[0], v1[1] - v2[1]];
        let net = net_from_columns(&[v1, v2, t], &[0.1, -0.4, 0.5], &[1.0, 1.0, 1.0]);
        assert!(find_linear_dependencies(&net, 1, 2, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn search_rejects_bad_arguments() {
        let net = net_from_columns(&[[1.0, 0.0]], &[0.0], &[1.0]);
        assert!(find_linear_dependencies(&net, 2, 2, 1e-9).is_err());
        assert!(find_linear_dependencies(&net, 1, 1, 1e-9).is_err());
    }

    #[test]
    fn one_donor_elimination_matches_quotient_example() {
        // t = 2 v, W(v, z) = 3, W(t, z) = 4 -> 3 + 2 * 4 = 11.
        let net = net_from_columns(&[[1.0, 0.0], [2.0, 0.0]], &[0.0, 0.0], &[3.0, 4.0]);
        let e = Elimination { layer: 1, neuron: 1, donors: vec![(0, 2.0)], residual: 0.0 };
        let reduced = eliminate(&net, &[e]).unwrap();
        assert_eq!(reduced.widths(), vec![2, 1, 1]);
        assert_eq!(reduced.layer(2).weights(), &[11.0]);
    }

    #[test]
    fn empty_elimination_is_identity() {
        let net = net_from_columns(&[[1.0, 0.3], [2.0, -0.7]], &[0.1, 0.0], &[3.0, 4.0]);
        assert_eq!(eliminate(&net, &[]).unwrap(), net);
    }

    #[test]
    fn two_donors_each_gain_the_outgoing_weight() {
        let net = net_from_columns(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], &[0.0; 3], &[0.5, -0.25, 1.0]);
        let e = Elimination { layer: 1, neuron: 2, donors: vec![(0, 1.0), (1, 1.0)], residual: 0.0 };
        let reduced = eliminate(&net, &[e]).unwrap();
        assert_eq!(reduced.layer(2).weights(), &[1.5, 0.75]);
    }

    #[test]
    fn conflicting_eliminations_are_rejected() {
        let net = net_from_columns(&[[1.0, 0.0], [2.0, 0.0], [4.0, 0.0]], &[0.0; 3], &[1.0; 3]);
        let elims = [
            Elimination { layer: 1, neuron: 1, donors: vec![(0, 2.0)], residual: 0.0 },
            Elimination { layer: 1, neuron: 2, donors: vec![(1, 2.0)], residual: 0.0 },
        ];
        assert!(matches!(eliminate(&net, &elims), Err(Error::InvalidElimination(_))));
    }

    #[test]
    fn sign_rate_examples() {
        // Constant positive donors.
        let net = net_from_columns(&[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], &[0.5, 0.5, 1.0], &[1.0; 3]);
        let e = Elimination { layer: 1, neuron: 2, donors: vec![(0, 1.0), (1, 1.0)], residual: 0.0 };
        assert_eq!(sign_condition_rate(&net, &e, 500, 3).unwrap().fraction, 1.0);

        // Donors x1 and -x1 disagree unless x1 == 0.
        let net = net_from_columns(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]], &[0.0; 3], &[1.0; 3]);
        let report = sign_condition_rate(&net, &e, 2000, 3).unwrap();
        assert!(report.fraction < 0.01, "{report:?}");
        assert_eq!(report.samples, 2000);
    }

    #[test]
    fn same_sign_elimination_is_exact() {
        let v1 = [1.0, 0.2];
        let v2 = [0.6, 0.9];
        let t = [2.0 * v1[0] + 0.5 * v2[0], 2.0 * v1[1] + 0.5 * v2[1]];
        let bias = [0.1, 0.3, 2.0 * 0.1 + 0.5 * 0.3];
        let net = net_from_columns(&[v1, v2, t], &bias, &[1.0, -0.5, 0.75]);
        let elims = find_linear_dependencies(&net, 1, 3, 1e-9).unwrap();
        let reduced = eliminate(&net, &elims).unwrap();
        for x in sampling::uniform_inputs(11, 200, 2) {
            let y1 = v1[0] * x[0] + v1[1] * x[1] + bias[0];
            let y2 = v2[0] * x[0] + v2[1] * x[1] + bias[1];
            if same_sign([y1, y2]) {
                let a = forward(&net, &x).unwrap()[0];
                let b = forward(&reduced, &x).unwrap()[0];
                assert!((a - b).abs() <= 1e-12, "x = {x:?}");
            }
        }
    }
}
