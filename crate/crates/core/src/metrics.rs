//! Top-irrelevant identification, the top-precision measure, the per-pair
//! hinge loss and the regularized primal objective.

use serde::Serialize;

use crate::domain::{RetrievalDataset, SimilarityModel};
use crate::error::{Error, Result};
use crate::similarity::score_all;

fn check_lengths(scores: &[f64], relevance: &[bool]) -> Result<()> {
    if scores.len() != relevance.len() {
        return Err(Error::DimensionMismatch {
            what: "relevance row".into(),
            expected: scores.len(),
            found: relevance.len(),
        });
    }
    Ok(())
}

/// Highest-scoring irrelevant item, lowest index on ties. `None` when every
/// item is relevant.
pub fn top_irrelevant_index(scores: &[f64], relevance: &[bool]) -> Result<Option<usize>> {
    check_lengths(scores, relevance)?;
    let mut best: Option<usize> = None;
    for (k, (&s, &rel)) in scores.iter().zip(relevance).enumerate() {
        if rel {
            continue;
        }
        match best {
            Some(b) if scores[b] >= s => {}
            _ => best = Some(k),
        }
    }
    Ok(best)
}

/// Counts behind one query's top precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopPrecisionCounts {
    /// Relevant items scored strictly above the top irrelevant item.
    pub above: usize,
    pub relevant: usize,
}

impl TopPrecisionCounts {
    pub fn value(&self) -> f64 {
        self.above as f64 / self.relevant as f64
    }
}

/// Counts for [`top_precision`]; `None` when the row has no relevant item.
pub fn top_precision_counts(
    scores: &[f64],
    relevance: &[bool],
) -> Result<Option<TopPrecisionCounts>> {
    let top = top_irrelevant_index(scores, relevance)?;
    let relevant = relevance.iter().filter(|&&r| r).count();
    if relevant == 0 {
        return Ok(None);
    }
    let above = match top {
        None => relevant,
        Some(k) => {
            let threshold = scores[k];
            scores
                .iter()
                .zip(relevance)
                .filter(|(&s, &r)| r && s > threshold)
                .count()
        }
    };
    Ok(Some(TopPrecisionCounts { above, relevant }))
}

/// Fraction of relevant items scored strictly above the top irrelevant item.
/// `None` (undefined) when there is no relevant item; 1.0 when there is no
/// irrelevant item.
pub fn top_precision(scores: &[f64], relevance: &[bool]) -> Result<Option<f64>> {
    Ok(top_precision_counts(scores, relevance)?.map(|c| c.value()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPrecision {
    pub query: usize,
    pub top_precision: f64,
    pub relevant: usize,
    pub above_top_irrelevant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanTopPrecision {
    pub mean: f64,
    pub per_query: Vec<QueryPrecision>,
    /// Queries without any relevant item, excluded from the mean.
    pub skipped: Vec<usize>,
}

/// Unweighted mean top precision over the evaluable queries of `subset`.
pub fn mean_top_precision(
    ds: &RetrievalDataset,
    model: &SimilarityModel,
    subset: &[usize],
) -> Result<MeanTopPrecision> {
    ds.check_query_indices(subset)?;
    let mut per_query = Vec::new();
    let mut skipped = Vec::new();
    for &i in subset {
        let scores = score_all(ds.query(i), ds, model)?;
        match top_precision_counts(&scores, ds.relevance_row(i))? {
            Some(c) => per_query.push(QueryPrecision {
                query: i,
                top_precision: c.value(),
                relevant: c.relevant,
                above_top_irrelevant: c.above,
            }),
            None => skipped.push(i),
        }
    }
    if per_query.is_empty() {
        return Err(Error::NoEvaluableQueries);
    }
    let sum: f64 = per_query.iter().map(|q| q.top_precision).sum();
    Ok(MeanTopPrecision {
        mean: sum / per_query.len() as f64,
        per_query,
        skipped,
    })
}

/// Hinge loss of a pair given the query's scores:
/// `max(0, max_k s_k − s_j + 1)` over irrelevant `k`; 0 without irrelevant items.
pub(crate) fn hinge_from_scores(scores: &[f64], relevance: &[bool], j: usize) -> f64 {
    let worst = scores
        .iter()
        .zip(relevance)
        .filter(|(_, &r)| !r)
        .map(|(&s, _)| s - scores[j] + 1.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY {
        0.0
    } else {
        worst.max(0.0)
    }
}

/// Hinge loss of the relevant pair `(i, j)`.
pub fn hinge_loss(
    ds: &RetrievalDataset,
    model: &SimilarityModel,
    i: usize,
    j: usize,
) -> Result<f64> {
    ds.check_query_indices(&[i])?;
    if j >= ds.n_database() {
        return Err(Error::IndexOutOfRange {
            what: "database",
            index: j,
            len: ds.n_database(),
        });
    }
    if !ds.is_relevant(i, j) {
        return Err(Error::NotRelevantPair { query: i, item: j });
    }
    let scores = score_all(ds.query(i), ds, model)?;
    Ok(hinge_from_scores(&scores, ds.relevance_row(i), j))
}

/// Sum of hinge losses over every relevant pair of the given queries.
pub fn total_hinge_loss(
    ds: &RetrievalDataset,
    model: &SimilarityModel,
    queries: &[usize],
) -> Result<f64> {
    ds.check_query_indices(queries)?;
    let mut total = 0.0;
    for &i in queries {
        let scores = score_all(ds.query(i), ds, model)?;
        let row = ds.relevance_row(i);
        for j in (0..row.len()).filter(|&j| row[j]) {
            total += hinge_from_scores(&scores, row, j);
        }
    }
    Ok(total)
}

/// `½‖W‖²_F + C Σ ξ_ij` over all relevant pairs, slacks at their optimum.
pub fn primal_objective(ds: &RetrievalDataset, model: &SimilarityModel, c: f64) -> Result<f64> {
    let all: Vec<usize> = (0..ds.n_queries()).collect();
    primal_objective_for(ds, model, c, &all)
}

/// Primal objective restricted to the relevant pairs of `queries`.
pub fn primal_objective_for(
    ds: &RetrievalDataset,
    model: &SimilarityModel,
    c: f64,
    queries: &[usize],
) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    let loss = total_hinge_loss(ds, model, queries)?;
    Ok(0.5 * model.w().frobenius_norm_sq() + c * loss)
}
