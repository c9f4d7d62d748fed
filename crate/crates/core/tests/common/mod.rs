#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use topsim::{enumerate_triplets, RetrievalDataset};

/// Uniform features in [-1, 1] and a random relevance pattern, redrawn until
/// the triplet count lies in `triplets`.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    max_m: usize,
    max_d: usize,
    triplets: std::ops::RangeInclusive<usize>,
) -> RetrievalDataset {
    loop {
        let n = rng.random_range(1..=max_n);
        let m = rng.random_range(2..=max_m);
        let d = rng.random_range(1..=max_d);
        let mut vecs = |count: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        let queries = vecs(n);
        let database = vecs(m);
        let relevance: Vec<Vec<i64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(0..2)).collect())
            .collect();
        let ds = RetrievalDataset::new(queries, database, relevance).unwrap();
        if triplets.contains(&enumerate_triplets(&ds, None).len()) {
            return ds;
        }
    }
}

/// Dense Gram matrix straight from the features, `T × T` row-major.
pub fn dense_gram(ds: &RetrievalDataset) -> (Vec<f64>, usize) {
    let set = enumerate_triplets(ds, None);
    let ts = set.triplets();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let diff = |j: usize, k: usize| -> Vec<f64> {
        ds.item(j)
            .as_slice()
            .iter()
            .zip(ds.item(k).as_slice())
            .map(|(a, b)| a - b)
            .collect()
    };
    let t = ts.len();
    let mut g = vec![0.0; t * t];
    for (a, ta) in ts.iter().enumerate() {
        for (b, tb) in ts.iter().enumerate() {
            g[a * t + b] = dot(ds.query(ta.query).as_slice(), ds.query(tb.query).as_slice())
                * dot(
                    &diff(ta.relevant, ta.irrelevant),
                    &diff(tb.relevant, tb.irrelevant),
                );
        }
    }
    (g, t)
}

/// Group label of each triplet: equal labels share a `Σ β ≤ C` constraint.
pub fn group_labels(ds: &RetrievalDataset) -> Vec<usize> {
    let set = enumerate_triplets(ds, None);
    let mut labels = vec![0; set.len()];
    for (gi, g) in set.groups().iter().enumerate() {
        for pos in g.range.clone() {
            labels[pos] = gi;
        }
    }
    labels
}

pub fn quadratic_objective(beta: &[f64], g: &[f64]) -> f64 {
    let t = beta.len();
    let mut quad = 0.0;
    for a in 0..t {
        for b in 0..t {
            quad += beta[a] * g[a * t + b] * beta[b];
        }
    }
    beta.iter().sum::<f64>() - 0.5 * quad
}
