//! Bilinear similarity learning for retrieval.
//!
//! A model scores a query `z` against a database item `x` with
//! `s(z, x) = zᵀ W x`. Training picks `W` so that, for every query, each
//! relevant item outscores the highest-scoring irrelevant item by a unit
//! margin, with hinge-loss slack and Frobenius regularization. The problem
//! is solved in its dual over triplet multipliers and `W` is rebuilt from
//! them. Retrieval quality is measured with top precision: the fraction of
//! a query's relevant items ranked strictly above its top irrelevant item.

pub mod dataio;
pub mod domain;
pub mod error;
pub mod metrics;
pub mod qp;
pub mod similarity;
pub mod trainer;
pub mod triplets;

#[doc(hidden)]
pub mod cli;

pub use domain::{
    validate_dataset, FeatureVector, Preprocessing, Provenance, RankingResult, RetrievalDataset,
    SimilarityModel, SquareMatrix, ValidationReport, Violation,
};
pub use error::{Error, Result};
pub use qp::{DualSolution, SolverConfig};
pub use triplets::{enumerate_triplets, enumerate_triplets_for, Triplet, TripletSet};
