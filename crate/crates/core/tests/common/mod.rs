//! Shared test corpora.

#![allow(dead_code)]

use smart_core::sequences::{
    binary_to_losses, gen_alternating, gen_bernoulli, gen_lead_change, gen_uniform_losses,
    BinarySequence,
};
use smart_core::LossMatrix;

pub const N: usize = 1000;

/// Bernoulli p in {0.05, ..., 0.50} x 10 seeds, lead-change c in 1..=100,
/// and the alternating sequence, all of length `N`.
pub fn binary_corpus() -> Vec<(String, BinarySequence)> {
    let mut out = Vec::new();
    for i in 1..=10 {
        let p = i as f64 * 0.05;
        for seed in 0..10 {
            out.push((
                format!("bernoulli p={p:.2} seed={seed}"),
                gen_bernoulli(N, p, seed).unwrap(),
            ));
        }
    }
    for c in 1..=100 {
        out.push((format!("lead-change c={c}"), gen_lead_change(N, c).unwrap()));
    }
    out.push(("alternating".into(), gen_alternating(N)));
    out
}

/// Random expert matrices with m in {2, 5, 10}.
pub fn expert_corpus() -> Vec<(String, LossMatrix)> {
    let mut out = Vec::new();
    for m in [2usize, 5, 10] {
        for seed in 0..10 {
            out.push((
                format!("uniform m={m} seed={seed}"),
                gen_uniform_losses(N, m, seed).unwrap(),
            ));
        }
    }
    out
}

pub fn all_losses() -> Vec<(String, LossMatrix)> {
    let mut out: Vec<_> = binary_corpus()
        .into_iter()
        .map(|(name, y)| (name, binary_to_losses(&y).unwrap()))
        .collect();
    out.extend(expert_corpus());
    out.extend(adversarial_corpus());
    out
}

/// Rounds charging loss 1 to whichever expert small-loss Hedge weights most.
pub fn hedge_adversary(n: usize, m: usize) -> LossMatrix {
    use smart_core::policies::{Hedge, HedgeConfig};
    let mut hedge = Hedge::new(m, HedgeConfig::default()).unwrap();
    let mut flat = Vec::with_capacity(n * m);
    for _ in 0..n {
        let a = hedge.action();
        let top = (0..m)
            .max_by(|&i, &j| a.weights()[i].total_cmp(&a.weights()[j]).then(j.cmp(&i)))
            .unwrap();
        let row: Vec<f64> = (0..m).map(|j| if j == top { 1.0 } else { 0.0 }).collect();
        smart_core::Policy::observe(&mut hedge, &row).unwrap();
        flat.extend(row);
    }
    LossMatrix::from_flat(n, m, flat).unwrap()
}

pub fn adversarial_corpus() -> Vec<(String, LossMatrix)> {
    let mut out = Vec::new();
    for m in [2usize, 5, 10] {
        for n in [10usize, 100, N] {
            out.push((
                format!("hedge-adversary m={m} n={n}"),
                hedge_adversary(n, m),
            ));
        }
    }
    out
}
