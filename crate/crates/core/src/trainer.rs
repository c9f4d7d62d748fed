//! Training pipeline, the identity baseline, evaluation and query splits.
//!
//! Only queries are split; the database is shared by training and testing.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{Preprocessing, Provenance, RetrievalDataset, SimilarityModel};
use crate::error::{Error, Result};
use crate::metrics::{mean_top_precision, QueryPrecision};
use crate::qp::{certify, solve_dual, Certificate, DualSolution, GramOracle, SolverConfig};
use crate::triplets::enumerate_triplets_for;

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: SimilarityModel,
    pub solution: DualSolution,
    pub certificate: Certificate,
    pub warnings: Vec<String>,
}

pub fn train(
    ds: &RetrievalDataset,
    train_queries: &[usize],
    cfg: &SolverConfig,
) -> Result<TrainOutput> {
    train_with(ds, train_queries, cfg, Preprocessing::default())
}

/// [`train`] with feature preprocessing, which is recorded in the model.
pub fn train_with(
    ds: &RetrievalDataset,
    train_queries: &[usize],
    cfg: &SolverConfig,
    preprocessing: Preprocessing,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if train_queries.is_empty() {
        return Err(Error::InvalidParameter("no training queries".into()));
    }
    ds.check_query_indices(train_queries)?;
    let ds: Cow<RetrievalDataset> = if preprocessing.l2_normalize {
        Cow::Owned(ds.l2_normalized())
    } else {
        Cow::Borrowed(ds)
    };

    let cap = cfg.working_set.map(|ws| ws.cap_per_pair);
    let triplets = enumerate_triplets_for(&ds, train_queries, cap);
    let mut warnings = Vec::new();
    if triplets.is_empty() {
        warnings.push(
            "training queries have no (relevant, irrelevant) pairs; the model is W = 0".to_string(),
        );
    }
    let oracle = GramOracle::new(&ds)?;
    let solution = solve_dual(&triplets, &oracle, cfg)?;
    if !solution.converged {
        warnings.push(format!(
            "solver stopped after {} iterations without converging",
            solution.iterations
        ));
    }
    let model = solution.model(&ds, preprocessing)?;
    let certificate = certify(&solution, &ds, cfg.kkt_tol)?;
    Ok(TrainOutput {
        model,
        solution,
        certificate,
        warnings,
    })
}

/// `W = I`, so scores are plain inner products.
pub fn baseline_identity(dim: usize) -> Result<SimilarityModel> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be ≥ 1".into()));
    }
    SimilarityModel::identity(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub mean_top_precision: f64,
    pub evaluated: usize,
    pub per_query: Vec<QueryPrecision>,
    pub skipped: Vec<usize>,
    pub provenance: Provenance,
}

pub fn evaluate(
    ds: &RetrievalDataset,
    model: &SimilarityModel,
    test_queries: &[usize],
) -> Result<EvaluationReport> {
    if test_queries.is_empty() {
        return Err(Error::InvalidParameter("no evaluation queries".into()));
    }
    if ds.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "dataset features".into(),
            expected: model.dim(),
            found: ds.dim(),
        });
    }
    let prepared = model.prepare(ds);
    let mtp = mean_top_precision(&prepared, model, test_queries)?;
    Ok(EvaluationReport {
        mean_top_precision: mtp.mean,
        evaluated: mtp.per_query.len(),
        per_query: mtp.per_query,
        skipped: mtp.skipped,
        provenance: model.provenance(),
    })
}

/// Seeded shuffle of `0..n` into sorted `(train, test)` index lists. The test
/// share is `round(n · test_fraction)` clamped to `[1, n − 1]`.
pub fn split_queries(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "splitting needs at least two queries".into(),
        ));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(
            "test fraction must lie in (0, 1)".into(),
        ));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}
