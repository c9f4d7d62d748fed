//! Seeded synthetic retrieval datasets.
//!
//! `Separable` places each query and its relevant items on a shared class
//! direction and every other item on a different orthonormal direction, so at
//! zero noise plain inner products separate relevant from irrelevant.
//! `RotatedCorrelation` labels relevance with a hidden bilinear form
//! `zᵀ W* x`, which the identity model ranks poorly.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{RetrievalDataset, SquareMatrix};
use crate::error::{Error, Result};
use crate::similarity::order_by_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Separable,
    RotatedCorrelation,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separable" => Ok(SyntheticKind::Separable),
            "rotated" | "rotated_correlation" => Ok(SyntheticKind::RotatedCorrelation),
            other => Err(Error::InvalidParameter(format!(
                "unknown synthetic kind {other:?} (expected separable or rotated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub kind: SyntheticKind,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub relevant_per_query: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            kind: SyntheticKind::Separable,
            n: 40,
            m: 100,
            d: 16,
            relevant_per_query: 5,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("m", self.m),
            ("d", self.d),
            ("relevant", self.relevant_per_query),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be ≥ 1")));
            }
        }
        if self.relevant_per_query >= self.m {
            return Err(Error::InvalidParameter(format!(
                "relevant ({}) must be < m ({})",
                self.relevant_per_query, self.m
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(
                "noise must be finite and ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: RetrievalDataset,
    /// The labelling matrix `W*` of the rotated family.
    pub hidden_w: Option<SquareMatrix>,
}

pub fn generate_synthetic(params: &SyntheticParams) -> Result<SyntheticDataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    match params.kind {
        SyntheticKind::Separable => separable(params, &mut rng),
        SyntheticKind::RotatedCorrelation => rotated(params, &mut rng),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Columns of the Q factor of a Gaussian matrix, as rows.
fn orthonormal_basis(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let g = DMatrix::from_vec(d, d, gaussian(rng, d * d));
    let q = g.qr().q();
    (0..d)
        .map(|c| q.column(c).iter().copied().collect())
        .collect()
}

fn add_noise(rng: &mut ChaCha8Rng, v: &mut [f64], noise: f64) {
    if noise > 0.0 {
        let e = gaussian(rng, v.len());
        for (x, e) in v.iter_mut().zip(e) {
            *x += noise * e;
        }
    }
}

fn scaled(dir: &[f64], s: f64) -> Vec<f64> {
    dir.iter().map(|v| v * s).collect()
}

fn separable(p: &SyntheticParams, rng: &mut ChaCha8Rng) -> Result<SyntheticDataset> {
    let (n, m, d, r) = (p.n, p.m, p.d, p.relevant_per_query);
    let classes = n.min(d).min(m / r);
    let basis = orthonormal_basis(rng, d);

    // Items not claimed by a class sit on a direction orthogonal to every
    // class direction, or opposite to their sum when none is left.
    let distractor: Vec<f64> = if classes < d {
        let coef = gaussian(rng, d - classes);
        let mut v = vec![0.0; d];
        for (c, b) in coef.iter().zip(&basis[classes..]) {
            for (o, x) in v.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        let norm = crate::domain::dot(&v, &v).sqrt();
        scaled(&v, 1.0 / norm)
    } else {
        let mut v = vec![0.0; d];
        for b in &basis[..classes] {
            for (o, x) in v.iter_mut().zip(b) {
                *o -= x;
            }
        }
        scaled(&v, 1.0 / (classes as f64).sqrt())
    };

    let mut item_class: Vec<Option<usize>> = (0..m)
        .map(|slot| (slot < classes * r).then_some(slot / r))
        .collect();
    item_class.shuffle(rng);

    let queries: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut z = scaled(&basis[i % classes], rng.random_range(0.5..1.5));
            add_noise(rng, &mut z, p.noise);
            z
        })
        .collect();
    let database: Vec<Vec<f64>> = item_class
        .iter()
        .map(|c| {
            let dir = c.map_or(&distractor, |c| &basis[c]);
            let mut x = scaled(dir, rng.random_range(0.5..1.5));
            add_noise(rng, &mut x, p.noise);
            x
        })
        .collect();
    let relevance: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            item_class
                .iter()
                .map(|&c| i64::from(c == Some(i % classes)))
                .collect()
        })
        .collect();
    Ok(SyntheticDataset {
        dataset: RetrievalDataset::new(queries, database, relevance)?,
        hidden_w: None,
    })
}

fn rotated(p: &SyntheticParams, rng: &mut ChaCha8Rng) -> Result<SyntheticDataset> {
    let (n, m, d, r) = (p.n, p.m, p.d, p.relevant_per_query);
    // W* = Q · diag(s), singular values in [0.5, 2].
    let basis = orthonormal_basis(rng, d);
    let s: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut w = SquareMatrix::zeros(d);
    for a in 0..d {
        for b in 0..d {
            w[(a, b)] = basis[b][a] * s[b];
        }
    }

    let mut queries: Vec<Vec<f64>> = (0..n).map(|_| gaussian(rng, d)).collect();
    let mut database: Vec<Vec<f64>> = (0..m).map(|_| gaussian(rng, d)).collect();
    let relevance: Vec<Vec<i64>> = queries
        .iter()
        .map(|z| {
            let scores: Vec<f64> = database
                .iter()
                .map(|x| crate::similarity::bilinear(z, &w, x))
                .collect();
            let mut row = vec![0; m];
            for &j in &order_by_score(&scores)[..r] {
                row[j] = 1;
            }
            row
        })
        .collect();
    for v in queries.iter_mut().chain(database.iter_mut()) {
        add_noise(rng, v, p.noise);
    }
    Ok(SyntheticDataset {
        dataset: RetrievalDataset::new(queries, database, relevance)?,
        hidden_w: Some(w),
    })
}
