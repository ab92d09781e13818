//! Synthetic networks with planted structure, agreement metrics, and the
//! pruning-degradation sweep.
//!
//! Base networks draw every weight and bias i.i.d. uniform in `[-1, 1]`.
//! Hidden layers use ReLU; the output layer uses LeakyReLU(0.01) so that
//! argmax comparisons are not dominated by ties at zero.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{forward, Activation, Layer, Network};
use crate::relax::{eliminate, Elimination};
use crate::sampling::{self, derive_seed};

pub const OUTPUT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantKind {
    /// `count` neurons overwritten with positive multiples of other
    /// neurons' incoming weights and bias.
    Proportional { count: usize, scale: (f64, f64) },
    /// `count` neurons overwritten with positive combinations of `k` other
    /// neurons. With `grid`, coefficients are multiples of 1/2.
    Combo {
        k: usize,
        count: usize,
        coeff: (f64, f64),
        #[serde(default)]
        grid: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub widths: Vec<usize>,
    /// Hidden layer to plant in, `1..k`.
    pub layer: usize,
    pub kind: PlantKind,
    pub seed: u64,
}

/// `target` computes `scale` times `source`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedMerge {
    pub layer: usize,
    pub source: usize,
    pub target: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub merges: Vec<PlantedMerge>,
    /// Exact combinations, residual 0.
    pub eliminations: Vec<Elimination>,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.widths.len() < 3 {
            return bad("need at least one hidden layer (three widths)".into());
        }
        if self.widths.contains(&0) {
            return bad("widths must be positive".into());
        }
        if self.layer == 0 || self.layer + 1 >= self.widths.len() {
            return bad(format!("layer {} is not hidden", self.layer));
        }
        let width = self.widths[self.layer];
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi;
        match self.kind {
            PlantKind::Proportional { count, scale } => {
                if count > 0 && count >= width {
                    return bad(format!("planted count {count} must be below the layer width {width}"));
                }
                if !range_ok(scale) {
                    return bad(format!("scale range {scale:?} must lie in (0, inf)"));
                }
            }
            PlantKind::Combo { k, count, coeff, grid } => {
                if k < 2 {
                    return bad(format!("combo needs k >= 2, got {k}"));
                }
                if count + k > width {
                    return bad(format!("{count} combos of {k} donors do not fit in width {width}"));
                }
                if !range_ok(coeff) {
                    return bad(format!("coefficient range {coeff:?} must lie in (0, inf)"));
                }
                if grid && (coeff.1 * 2.0).floor() < (coeff.0 * 2.0).ceil() {
                    return bad(format!("no multiple of 1/2 in {coeff:?}"));
                }
            }
        }
        Ok(())
    }
}

/// Random network with the given widths. Hidden layers ReLU, output
/// LeakyReLU(0.01).
pub fn random_network(widths: &[usize], seed: u64) -> Result<Network> {
    if widths.len() < 2 {
        return Err(Error::InvalidSpec("need at least two widths".into()));
    }
    let mut rng = sampling::rng(seed);
    let k = widths.len() - 1;
    let layers = (1..=k)
        .map(|l| {
            let (m, n) = (widths[l - 1], widths[l]);
            let weights = sampling::uniform_vec(&mut rng, m * n, -1.0, 1.0);
            let bias = sampling::uniform_vec(&mut rng, n, -1.0, 1.0);
            let act = if l == k { Activation::LeakyRelu { alpha: OUTPUT_ALPHA } } else { Activation::Relu };
            Layer::new(m, n, weights, bias, act)
        })
        .collect();
    Network::new(layers)
}

/// Overwrites the incoming weights and bias of `target` in layer `l` with
/// `scale` times those of `source`.
pub fn plant_proportional(
    net: &Network,
    l: usize,
    source: usize,
    target: usize,
    scale: f64,
) -> Result<Network> {
    plant_combo(net, l, target, &[(source, scale)])
}

/// Overwrites the incoming weights and bias of `target` in layer `l` with
/// `sum_i c_i` times those of donor `v_i`.
pub fn plant_combo(net: &Network, l: usize, target: usize, donors: &[(usize, f64)]) -> Result<Network> {
    if l == 0 || l > net.depth() {
        return Err(Error::InvalidSpec(format!("layer {l} out of range")));
    }
    let width = net.width(l);
    if target >= width || donors.iter().any(|&(v, _)| v >= width || v == target) {
        return Err(Error::InvalidSpec(format!("bad target {target} or donors {donors:?}")));
    }
    let mut layers = net.layers().to_vec();
    let layer = &mut layers[l - 1];
    for u in 0..layer.in_width() {
        let mut w = 0.0;
        for &(v, c) in donors {
            w += c * layer.weight(u, v);
        }
        *layer.weight_mut(u, target) = w;
    }
    let mut b = 0.0;
    for &(v, c) in donors {
        b += c * layer.bias()[v];
    }
    layer.bias_mut()[target] = b;
    Network::new(layers)
}

fn draw_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64), grid: bool) -> f64 {
    if grid {
        let (a, b) = ((lo * 2.0).ceil() as i64, (hi * 2.0).floor() as i64);
        rng.gen_range(a..=b) as f64 / 2.0
    } else if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Random base network plus planted structure. The base net depends only
/// on `seed`; the planting uses an independent derived stream, so specs
/// that differ only in `kind` share the same base.
pub fn gen_planted(spec: &PlantSpec) -> Result<(Network, GroundTruth)> {
    spec.validate()?;
    let mut net = random_network(&spec.widths, derive_seed(spec.seed, 0))?;
    let mut rng = sampling::rng(derive_seed(spec.seed, 1));
    let l = spec.layer;
    let width = spec.widths[l];
    let mut truth = GroundTruth::default();
    match spec.kind {
        PlantKind::Proportional { count, scale } => {
            let mut order: Vec<usize> = (0..width).collect();
            order.shuffle(&mut rng);
            let (targets, sources) = order.split_at(count);
            for &target in targets {
                let source = *sources.choose(&mut rng).expect("count < width");
                let s = draw_in(&mut rng, scale, false);
                net = plant_proportional(&net, l, source, target, s)?;
                truth.merges.push(PlantedMerge { layer: l, source, target, scale: s });
            }
            truth.merges.sort_by_key(|m| m.target);
        }
        PlantKind::Combo { k, count, coeff, grid } => {
            // Targets sit at index >= k so each has at least k unplanted
            // neurons below it to draw donors from.
            let mut order: Vec<usize> = (k..width).collect();
            order.shuffle(&mut rng);
            let mut targets = order[..count].to_vec();
            targets.sort_unstable();
            let mut planted = vec![false; width];
            for &t in &targets {
                planted[t] = true;
            }
            for &t in &targets {
                let pool: Vec<usize> = (0..t).filter(|&v| !planted[v]).collect();
                let mut chosen: Vec<usize> = pool.choose_multiple(&mut rng, k).copied().collect();
                chosen.sort_unstable();
                let donors: Vec<(usize, f64)> =
                    chosen.iter().map(|&v| (v, draw_in(&mut rng, coeff, grid))).collect();
                net = plant_combo(&net, l, t, &donors)?;
                truth.eliminations.push(Elimination { layer: l, neuron: t, donors, residual: 0.0 });
            }
        }
    }
    Ok((net, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMetrics {
    pub max_deviation: f64,
    pub agreement: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Index of the largest entry; ties go to the smaller index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Max-abs output deviation and argmax agreement over `samples` seeded
/// uniform inputs.
pub fn agreement(a: &Network, b: &Network, samples: usize, seed: u64) -> Result<AgreementMetrics> {
    if a.input_width() != b.input_width() || a.output_width() != b.output_width() {
        return Err(Error::Shape { expected: a.input_width(), actual: b.input_width() });
    }
    let mut max_deviation = 0.0f64;
    let mut agree = 0usize;
    for x in sampling::uniform_inputs(seed, samples, a.input_width()) {
        let ya = forward(a, &x)?;
        let yb = forward(b, &x)?;
        for (p, q) in ya.iter().zip(&yb) {
            max_deviation = max_deviation.max((p - q).abs());
        }
        if argmax(&ya) == argmax(&yb) {
            agree += 1;
        }
    }
    Ok(AgreementMetrics {
        max_deviation,
        agreement: if samples == 0 { 1.0 } else { agree as f64 / samples as f64 },
        samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Config {
    pub widths: Vec<usize>,
    pub layer: usize,
    pub ks: Vec<usize>,
    /// Planted fraction of the layer width.
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub samples: usize,
    pub coeff: (f64, f64),
}

impl Default for Fig3Config {
    fn default() -> Self {
        Fig3Config {
            widths: vec![16, 128, 10],
            layer: 1,
            ks: vec![2, 3, 4],
            fractions: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            seeds: (0..10).collect(),
            samples: 1000,
            coeff: (0.5, 1.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub k: usize,
    pub fraction: f64,
    pub seed: u64,
    pub agreement: f64,
    pub max_deviation: f64,
}

/// Planted count for a fraction of `width`, rounded to nearest.
pub fn planted_count(fraction: f64, width: usize) -> usize {
    (fraction * width as f64).round() as usize
}

/// One cell: plant combos, eliminate all of them by ground truth, and
/// compare against the unpruned network.
pub fn fig3_cell(cfg: &Fig3Config, k: usize, fraction: f64, seed: u64) -> Result<Fig3Row> {
    let spec = PlantSpec {
        widths: cfg.widths.clone(),
        layer: cfg.layer,
        kind: PlantKind::Combo {
            k,
            count: planted_count(fraction, cfg.widths.get(cfg.layer).copied().unwrap_or(0)),
            coeff: cfg.coeff,
            grid: false,
        },
        seed,
    };
    let (net, truth) = gen_planted(&spec)?;
    let pruned = eliminate(&net, &truth.eliminations)?;
    let m = agreement(&net, &pruned, cfg.samples, derive_seed(seed, 2))?;
    Ok(Fig3Row { k, fraction, seed, agreement: m.agreement, max_deviation: m.max_deviation })
}

/// Rows in canonical order: `k`, then fraction, then seed.
pub fn fig3_experiment(cfg: &Fig3Config) -> Result<Vec<Fig3Row>> {
    let mut rows = Vec::with_capacity(cfg.ks.len() * cfg.fractions.len() * cfg.seeds.len());
    for &k in &cfg.ks {
        for &f in &cfg.fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidSpec(format!("fraction {f} outside [0, 1]")));
            }
            for &s in &cfg.seeds {
                rows.push(fig3_cell(cfg, k, f, s)?);
            }
        }
    }
    Ok(rows)
}

pub const FIG3_HEADER: &str = "k,fraction,seed,agreement,max_deviation";

pub fn fig3_csv(rows: &[Fig3Row]) -> String {
    let mut out = String::from(FIG3_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.k, r.fraction, r.seed, r.agreement, r.max_deviation);
    }
    out
}

/// Mean agreement per `(k, fraction)`, in first-seen order.
pub fn mean_agreement(rows: &[Fig3Row]) -> Vec<(usize, f64, f64)> {
    let mut acc: Vec<(usize, f64, f64, usize)> = Vec::new();
    for r in rows {
        match acc.iter_mut().find(|(k, f, _, _)| *k == r.k && *f == r.fraction) {
            Some(e) => {
                e.2 += r.agreement;
                e.3 += 1;
            }
            None => acc.push((r.k, r.fraction, r.agreement, 1)),
        }
    }
    acc.into_iter().map(|(k, f, s, n)| (k, f, s / n as f64)).collect()
}
