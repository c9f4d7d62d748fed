//! Bilinear scoring `s(z, x) = zᵀ W x` and database ranking.

use std::cmp::Ordering;

use crate::domain::{FeatureVector, RankingResult, RetrievalDataset, SimilarityModel};
use crate::error::{Error, Result};

fn check_dim(what: &str, v: &FeatureVector, model: &SimilarityModel) -> Result<()> {
    if v.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: what.to_string(),
            expected: model.dim(),
            found: v.dim(),
        });
    }
    Ok(())
}

/// Accumulates row by row: `Σ_a z_a (Σ_b W_ab x_b)`.
pub(crate) fn bilinear(z: &[f64], w: &crate::domain::SquareMatrix, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, &za) in z.iter().enumerate() {
        let row_dot: f64 = w.row(a).iter().zip(x).map(|(wab, xb)| wab * xb).sum();
        acc += za * row_dot;
    }
    acc
}

pub fn score(z: &FeatureVector, x: &FeatureVector, model: &SimilarityModel) -> Result<f64> {
    check_dim("query vector", z, model)?;
    check_dim("database vector", x, model)?;
    Ok(bilinear(z.as_slice(), model.w(), x.as_slice()))
}

/// Scores of `z` against every database item, in database order.
pub fn score_all(
    z: &FeatureVector,
    ds: &RetrievalDataset,
    model: &SimilarityModel,
) -> Result<Vec<f64>> {
    check_dim("query vector", z, model)?;
    if ds.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "database vectors".into(),
            expected: model.dim(),
            found: ds.dim(),
        });
    }
    Ok(ds
        .database()
        .iter()
        .map(|x| bilinear(z.as_slice(), model.w(), x.as_slice()))
        .collect())
}

/// Descending order of scores; equal scores keep ascending index order.
pub fn order_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

pub fn rank_database(
    z: &FeatureVector,
    ds: &RetrievalDataset,
    model: &SimilarityModel,
) -> Result<RankingResult> {
    let scores = score_all(z, ds, model)?;
    let order = order_by_score(&scores);
    Ok(RankingResult { order, scores })
}
