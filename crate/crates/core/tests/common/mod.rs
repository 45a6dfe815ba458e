#![allow(dead_code)]

use hfnt::mogp::ObjectiveTriple;
use rand::{Rng, RngExt};
use serde_json::Value;

/// Straight transcription of the activation table, evaluated from the
/// tree's JSON document rather than the library's node types.
pub fn naive_eval(node: &Value, row: &[f64]) -> f64 {
    if let Some(f) = node.get("feature") {
        return row[f.as_u64().unwrap() as usize];
    }
    let kind = node["kind"].as_u64().unwrap();
    let a = node["a"].as_f64().unwrap();
    let b = node["b"].as_f64().unwrap();
    let weights = node["weights"].as_array().unwrap();
    let children = node["children"].as_array().unwrap();
    let mut x = 0.0;
    for (w, c) in weights.iter().zip(children) {
        x += w.as_f64().unwrap() * naive_eval(c, row);
    }
    match kind {
        1 => (-((x - a) * (x - a)) / (b * b)).exp(),
        2 => x.tanh(),
        3 => 1.0 / (1.0 + (-x).exp()),
        4 => a / (1.0 + (-x).exp()) + b,
        5 => a * x.tanh() + b,
        6 => (1.0 - (-2.0 * x * a).exp()) / (a * (1.0 + (-2.0 * x * a).exp())),
        7 => 2.0 * a.abs() / (1.0 + (-2.0 * a.abs() * x).exp()),
        k => panic!("unknown activation {k}"),
    }
}

/// Brute-force fronts: repeatedly peel off the members no remaining member
/// dominates, using a full dominance table.
pub fn brute_force_fronts(objs: &[ObjectiveTriple]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let arr: Vec<[f64; 3]> = objs.iter().map(|o| [o.error, o.size, o.neg_diversity]).collect();
    let dom = |i: usize, j: usize| {
        arr[i].iter().zip(&arr[j]).all(|(x, y)| x <= y) && arr[i].iter().zip(&arr[j]).any(|(x, y)| x < y)
    };
    let table: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| dom(i, j)).collect()).collect();
    let mut left: Vec<usize> = (0..n).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left.iter().copied().filter(|&i| !left.iter().any(|&j| table[j][i])).collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Random objective triples on a coarse grid (many ties and duplicates).
pub fn random_objectives<R: Rng>(rng: &mut R, max_len: usize) -> Vec<ObjectiveTriple> {
    let n = rng.random_range(1..=max_len);
    (0..n)
        .map(|_| {
            ObjectiveTriple::new(
                rng.random_range(0..8) as f64 / 8.0,
                rng.random_range(2..12) as f64,
                -(rng.random_range(1..=7) as f64),
            )
        })
        .collect()
}
