#![allow(dead_code)]

use gbn::{DenseNonnegMatrix, Observations, RngStream, SparseCountMatrix};
use rand::Rng;

/// Documents drawn from `k` disjoint-block topics over `v` terms.
pub fn block_corpus(v: usize, k: usize, docs: usize, len: u32, seed: u64) -> SparseCountMatrix {
    let mut rng = RngStream::new(seed);
    let block = v / k;
    let data: Vec<Vec<(usize, u32)>> = (0..docs)
        .map(|_| {
            let mut counts = vec![0u32; v];
            let a = rng.random_range(0..k);
            let b = rng.random_range(0..k);
            for _ in 0..len {
                let topic = if rng.random_bool(0.7) { a } else { b };
                counts[topic * block + rng.random_range(0..block)] += 1;
            }
            counts.into_iter().enumerate().filter(|(_, c)| *c > 0).collect()
        })
        .collect();
    SparseCountMatrix::from_docs(v, &data).unwrap()
}

pub fn toy_counts() -> Observations<f64> {
    Observations::Counts(block_corpus(12, 3, 15, 20, 7))
}

pub fn toy_binary() -> Observations<f64> {
    Observations::Binary(block_corpus(12, 3, 15, 20, 7).binarize())
}

pub fn toy_real() -> Observations<f64> {
    let m = block_corpus(12, 3, 15, 20, 7);
    let cols = (0..m.n_docs())
        .map(|j| (0..m.n_terms()).map(|v| m.get(v, j) as f64 * 0.37).collect())
        .collect();
    Observations::NonnegReal(DenseNonnegMatrix::from_columns(12, cols).unwrap())
}
