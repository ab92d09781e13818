#![allow(dead_code)]

use lumpnet::bench::{self, PlantKind, PlantSpec};
use lumpnet::ctmc::{ChainMode, Ctmc};
use lumpnet::partition::{labels_to_blocks, SetPartitions};
use lumpnet::{forward, Mode, Network};
use rand::Rng;

/// `a = c b` for some `c > 0` (or `c == 1` in exact mode), tested with
/// cross products so that integer-grid inputs are decided exactly.
pub fn related(a: &[f64], b: &[f64], mode: Mode) -> bool {
    if mode == Mode::Exact {
        return a == b;
    }
    let Some(j) = b.iter().position(|&x| x != 0.0) else {
        return a.iter().all(|&x| x == 0.0);
    };
    if a[j] == 0.0 || (a[j] > 0.0) != (b[j] > 0.0) {
        return false;
    }
    (0..a.len()).all(|i| a[i] * b[j] == a[j] * b[i])
}

/// Coarsest partition of `sigs` into blocks of mutually related vectors,
/// by enumerating every set partition.
pub fn enumerate_coarsest(sigs: &[Vec<f64>], mode: Mode) -> Vec<Vec<usize>> {
    let mut best: Option<Vec<Vec<usize>>> = None;
    for labels in SetPartitions::new(sigs.len()) {
        let blocks = labels_to_blocks(&labels);
        let ok = blocks.iter().all(|b| b.iter().all(|&t| related(&sigs[t], &sigs[b[0]], mode)));
        if ok && best.as_ref().is_none_or(|cur| blocks.len() < cur.len()) {
            best = Some(blocks);
        }
    }
    best.expect("the identity partition is always valid")
}

/// Integer-grid signatures with planted scaled copies and zero rows.
pub fn grid_signatures<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sigs: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let roll = rng.gen_range(0..10);
        let sig = if i > 0 && roll < 4 {
            let src = sigs[rng.gen_range(0..i)].clone();
            let c = [0.5, 1.0, 1.0, 2.0, 3.0][rng.gen_range(0..5)];
            src.iter().map(|x| c * x).collect()
        } else if roll == 4 {
            vec![0.0; dim]
        } else {
            (0..dim).map(|_| rng.gen_range(-3..=3) as f64).collect()
        };
        sigs.push(sig);
    }
    sigs
}

/// Random chain with integer rates in `1..=3` on a random edge set.
pub fn grid_chain<R: Rng>(rng: &mut R, n: usize, mode: ChainMode) -> Ctmc {
    let density = rng.gen_range(0.2..0.7);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(density) {
                let r = rng.gen_range(1..=3) as f64;
                let r = if mode == ChainMode::Graph && rng.gen_bool(0.2) { -r } else { r };
                edges.push((u, v, r));
            }
        }
    }
    Ctmc::from_edges(n, mode, &edges).unwrap()
}

/// Random net with planted proportional duplicates in one hidden layer.
pub fn planted_net(
    widths: Vec<usize>,
    layer: usize,
    count: usize,
    seed: u64,
) -> (Network, bench::GroundTruth) {
    bench::gen_planted(&PlantSpec {
        widths,
        layer,
        kind: PlantKind::Proportional { count, scale: (0.1, 10.0) },
        seed,
    })
    .unwrap()
}

/// Largest output deviation relative to `1 + max |output|`.
pub fn relative_deviation(a: &Network, b: &Network, inputs: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for x in inputs {
        let ya = forward(a, x).unwrap();
        let yb = forward(b, x).unwrap();
        let scale = 1.0 + ya.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (p, q) in ya.iter().zip(&yb) {
            worst = worst.max((p - q).abs() / scale);
        }
    }
    worst
}
