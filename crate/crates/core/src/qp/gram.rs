//! Coefficients of the dual quadratic form.
//!
//! The entry for triplets `t = (i, j, k)` and `t' = (i', j', k')` is
//! `(z_iᵀ z_i') · (x_j' − x_k')ᵀ (x_j − x_k)`. The full `T × T` matrix is
//! never needed by the solver: products `G v` go through the factored form
//! using only the `n × n` query Gram matrix and per-query aggregates.

use std::num::NonZeroUsize;
use std::sync::Mutex;

use lru::LruCache;

use crate::domain::{dot, RetrievalDataset};
use crate::error::{Error, Result};
use crate::triplets::{Triplet, TripletSet};

/// Difference dot products kept in memory.
pub const DIFF_CACHE_CAPACITY: usize = 100_000;

/// Largest triplet count for which [`GramOracle::dense`] materializes the matrix.
pub const MAX_DENSE_TRIPLETS: usize = 2000;

type DiffKey = ((usize, usize), (usize, usize));

pub struct GramOracle<'a> {
    ds: &'a RetrievalDataset,
    query_gram: Vec<f64>,
    diff_cache: Mutex<LruCache<DiffKey, f64>>,
}

impl<'a> GramOracle<'a> {
    pub fn new(ds: &'a RetrievalDataset) -> Result<Self> {
        let n = ds.n_queries();
        let mut query_gram = vec![0.0; n * n];
        for i in 0..n {
            for i2 in i..n {
                let g = ds.query(i).dot(ds.query(i2));
                query_gram[i * n + i2] = g;
                query_gram[i2 * n + i] = g;
            }
        }
        if let Some(pos) = query_gram.iter().position(|g| !g.is_finite()) {
            return Err(Error::NumericalOverflow(format!(
                "query inner product ({}, {}) is not finite",
                pos / n,
                pos % n
            )));
        }
        // Difference dot products are bounded by 4 max‖x‖².
        let max_sq = ds
            .database()
            .iter()
            .map(|x| x.dot(x))
            .fold(0.0f64, f64::max);
        if !(4.0 * max_sq).is_finite() {
            return Err(Error::NumericalOverflow(
                "database vector norms overflow".into(),
            ));
        }
        Ok(GramOracle {
            ds,
            query_gram,
            diff_cache: Mutex::new(LruCache::new(
                NonZeroUsize::new(DIFF_CACHE_CAPACITY).expect("nonzero capacity"),
            )),
        })
    }

    pub fn dataset(&self) -> &'a RetrievalDataset {
        self.ds
    }

    /// `z_iᵀ z_i'`.
    pub fn query_dot(&self, i: usize, i2: usize) -> f64 {
        self.query_gram[i * self.ds.n_queries() + i2]
    }

    /// `(x_j − x_k)ᵀ (x_j' − x_k')`, cached.
    pub fn diff_dot(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(&v) = self.cache().get(&key) {
            return v;
        }
        let (xa, ya) = (self.ds.item(a.0).as_slice(), self.ds.item(a.1).as_slice());
        let (xb, yb) = (self.ds.item(b.0).as_slice(), self.ds.item(b.1).as_slice());
        let v: f64 = (0..xa.len())
            .map(|c| (xa[c] - ya[c]) * (xb[c] - yb[c]))
            .sum();
        self.cache().put(key, v);
        v
    }

    fn cache(&self) -> std::sync::MutexGuard<'_, LruCache<DiffKey, f64>> {
        // A poisoned cache only holds plain numbers, so keep using it.
        self.diff_cache.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn gram_entry(&self, t: &Triplet, t2: &Triplet) -> f64 {
        self.query_dot(t.query, t2.query)
            * self.diff_dot((t.relevant, t.irrelevant), (t2.relevant, t2.irrelevant))
    }

    /// Dense row-major Gram matrix assembled entry by entry. Refuses sets
    /// larger than [`MAX_DENSE_TRIPLETS`].
    pub fn dense(&self, triplets: &TripletSet) -> Result<Vec<f64>> {
        let t = triplets.len();
        if t > MAX_DENSE_TRIPLETS {
            return Err(Error::InvalidParameter(format!(
                "refusing to materialize a {t}×{t} Gram matrix"
            )));
        }
        let ts = triplets.triplets();
        let mut g = vec![0.0; t * t];
        for a in 0..t {
            for b in a..t {
                let v = self.gram_entry(&ts[a], &ts[b]);
                g[a * t + b] = v;
                g[b * t + a] = v;
            }
        }
        Ok(g)
    }

    /// Database scores `p_iᵀ x_l` of every query in `triplets`, where
    /// `p_i = W(v)ᵀ z_i` and `W(v) = Σ_t v_t z_i (x_j − x_k)ᵀ`.
    ///
    /// Returns `(query, scores over all database items)` in ascending query order.
    pub(crate) fn query_scores(&self, triplets: &TripletSet, v: &[f64]) -> Vec<(usize, Vec<f64>)> {
        debug_assert_eq!(v.len(), triplets.len());
        let d = self.ds.dim();
        let m = self.ds.n_database();
        let queries = triplets.queries();

        // u_i = Σ_t v_t (x_j − x_k), via per-item coefficients.
        let mut u = vec![vec![0.0; d]; queries.len()];
        let mut coef = vec![0.0; m];
        let mut groups = triplets.groups().iter().peekable();
        for (qpos, &i) in queries.iter().enumerate() {
            coef.iter_mut().for_each(|c| *c = 0.0);
            while let Some(g) = groups.next_if(|g| g.query == i) {
                for pos in g.range.clone() {
                    let t = triplets.get(pos);
                    coef[t.relevant] += v[pos];
                    coef[t.irrelevant] -= v[pos];
                }
            }
            for (l, &c) in coef.iter().enumerate() {
                if c != 0.0 {
                    for (ua, xa) in u[qpos].iter_mut().zip(self.ds.item(l).as_slice()) {
                        *ua += c * xa;
                    }
                }
            }
        }

        // p_i = Σ_i' (z_iᵀ z_i') u_i'
        queries
            .iter()
            .map(|&i| {
                let mut p = vec![0.0; d];
                for (qpos2, &i2) in queries.iter().enumerate() {
                    let g = self.query_dot(i, i2);
                    if g != 0.0 {
                        for (pa, ua) in p.iter_mut().zip(&u[qpos2]) {
                            *pa += g * ua;
                        }
                    }
                }
                let scores = self
                    .ds
                    .database()
                    .iter()
                    .map(|x| dot(&p, x.as_slice()))
                    .collect();
                (i, scores)
            })
            .collect()
    }

    /// Matrix-free product `G v`: entry `t` equals `z_iᵀ W(v) (x_j − x_k)`.
    pub fn apply(&self, triplets: &TripletSet, v: &[f64]) -> Vec<f64> {
        let scores = self.query_scores(triplets, v);
        let mut out = vec![0.0; triplets.len()];
        let mut per_query = scores.iter();
        let mut current: Option<&(usize, Vec<f64>)> = None;
        for g in triplets.groups() {
            if current.map(|c| c.0) != Some(g.query) {
                current = per_query.find(|c| c.0 == g.query);
            }
            let s = &current.expect("scores for every grouped query").1;
            for pos in g.range.clone() {
                let t = triplets.get(pos);
                out[pos] = s[t.relevant] - s[t.irrelevant];
            }
        }
        out
    }
}

/// `Σβ − ½ βᵀ G β`.
pub fn dual_objective(beta: &[f64], triplets: &TripletSet, oracle: &GramOracle) -> f64 {
    if triplets.is_empty() {
        return 0.0;
    }
    let g_beta = oracle.apply(triplets, beta);
    objective_from_product(beta, &g_beta)
}

pub(crate) fn objective_from_product(beta: &[f64], g_beta: &[f64]) -> f64 {
    let linear: f64 = beta.iter().sum();
    linear - 0.5 * dot(beta, g_beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triplets::enumerate_triplets;

    fn t(query: usize, relevant: usize, irrelevant: usize) -> Triplet {
        Triplet {
            query,
            relevant,
            irrelevant,
        }
    }

    #[test]
    fn entry_examples() {
        // x_0 − x_1 = [0, 1], x_2 − x_3 = [0, 2]
        let ds = RetrievalDataset::new(
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![
                vec![1.0, 1.0],
                vec![1.0, 0.0],
                vec![0.0, 2.0],
                vec![0.0, 0.0],
            ],
            vec![vec![1, 0, 1, 0], vec![1, 0, 1, 0]],
        )
        .unwrap();
        let oracle = GramOracle::new(&ds).unwrap();
        assert_eq!(oracle.gram_entry(&t(0, 0, 1), &t(1, 2, 3)), 2.0);
        assert_eq!(oracle.gram_entry(&t(1, 2, 3), &t(0, 0, 1)), 2.0);

        let ds = RetrievalDataset::new(
            vec![vec![1.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1, 0]],
        )
        .unwrap();
        let oracle = GramOracle::new(&ds).unwrap();
        assert_eq!(oracle.gram_entry(&t(0, 0, 1), &t(0, 0, 1)), 4.0);

        let ds = RetrievalDataset::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![3.0, 1.0], vec![0.0, 5.0]],
            vec![vec![1, 0], vec![1, 0]],
        )
        .unwrap();
        let oracle = GramOracle::new(&ds).unwrap();
        assert_eq!(oracle.gram_entry(&t(0, 0, 1), &t(1, 0, 1)), 0.0);
    }

    #[test]
    fn factored_product_matches_dense() {
        let ds = RetrievalDataset::new(
            vec![
                vec![1.0, -0.5, 2.0],
                vec![0.3, 0.7, -1.1],
                vec![2.0, 0.0, 1.0],
            ],
            vec![
                vec![0.2, 1.0, -0.4],
                vec![1.5, -0.3, 0.8],
                vec![-1.0, 0.6, 0.1],
                vec![0.0, 2.2, -0.9],
            ],
            vec![vec![1, 0, 1, 0], vec![0, 1, 0, 0], vec![1, 1, 0, 1]],
        )
        .unwrap();
        let oracle = GramOracle::new(&ds).unwrap();
        let set = enumerate_triplets(&ds, None);
        let dense = oracle.dense(&set).unwrap();
        let n = set.len();
        let v: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.3).collect();
        let got = oracle.apply(&set, &v);
        for a in 0..n {
            let want: f64 = (0..n).map(|b| dense[a * n + b] * v[b]).sum();
            assert!(
                (got[a] - want).abs() < 1e-12,
                "row {a}: {} vs {want}",
                got[a]
            );
        }
    }

    #[test]
    fn dual_objective_examples() {
        let ds = RetrievalDataset::new(
            vec![vec![1.0]],
            vec![vec![2.0], vec![1.0]],
            vec![vec![1, 0]],
        )
        .unwrap();
        let oracle = GramOracle::new(&ds).unwrap();
        let set = enumerate_triplets(&ds, None);
        assert_eq!(oracle.dense(&set).unwrap(), vec![1.0]);
        assert_eq!(dual_objective(&[0.0], &set, &oracle), 0.0);
        assert_eq!(dual_objective(&[0.5], &set, &oracle), 0.375);
        assert_eq!(dual_objective(&[1.0], &set, &oracle), 0.5);
    }

    #[test]
    fn overflowing_features_are_rejected() {
        let ds = RetrievalDataset::new(
            vec![vec![1e200, 1e200]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1, 0]],
        )
        .unwrap();
        assert!(matches!(
            GramOracle::new(&ds),
            Err(Error::NumericalOverflow(_))
        ));
    }

    #[test]
    fn oracle_is_shareable_across_threads() {
        fn assert_sync<T: Sync>() {}
        assert_sync::<GramOracle<'static>>();
    }
}
