//! Domain types shared across the crate: feature vectors, the retrieval
//! dataset with its binary relevance matrix, the bilinear model parameters
//! and ranking results.
//!
//! All indices are 0-based.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense feature vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "feature vector must have at least one entry".into(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature value at position {pos}"
            )));
        }
        Ok(FeatureVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Scaled copy with unit Euclidean norm. Zero vectors are returned unchanged.
    pub fn l2_normalized(&self) -> FeatureVector {
        let norm = dot(&self.0, &self.0).sqrt();
        if norm == 0.0 {
            return self.clone();
        }
        FeatureVector(self.0.iter().map(|v| v / norm).collect())
    }
}

impl std::ops::Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                what: "row-major matrix data".into(),
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "matrix row".into(),
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, factor: f64) -> SquareMatrix {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// Adds `scale * u vᵀ`.
    pub fn add_outer(&mut self, scale: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.dim);
        debug_assert_eq!(v.len(), self.dim);
        for (a, &ua) in u.iter().enumerate() {
            let su = scale * ua;
            let row = &mut self.data[a * self.dim..(a + 1) * self.dim];
            for (w, &vb) in row.iter_mut().zip(v) {
                *w += su * vb;
            }
        }
    }

    /// `Wᵀ z`.
    pub fn transpose_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (a, &za) in z.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(a)) {
                *o += za * w;
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.dim + c]
    }
}

/// One problem found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoQueries,
    NoDatabase,
    ZeroDimension,
    QueryDimension {
        index: usize,
        found: usize,
    },
    DatabaseDimension {
        index: usize,
        found: usize,
    },
    NonFiniteQuery {
        index: usize,
        coord: usize,
    },
    NonFiniteDatabase {
        index: usize,
        coord: usize,
    },
    RelevanceRows {
        expected: usize,
        found: usize,
    },
    RelevanceColumns {
        row: usize,
        expected: usize,
        found: usize,
    },
    NonBinaryRelevance {
        row: usize,
        col: usize,
        value: i64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoQueries => write!(f, "no queries"),
            Violation::NoDatabase => write!(f, "empty database"),
            Violation::ZeroDimension => write!(f, "feature dimension is zero"),
            Violation::QueryDimension { index, found } => {
                write!(f, "dimension mismatch at query {index} (length {found})")
            }
            Violation::DatabaseDimension { index, found } => {
                write!(f, "dimension mismatch at database {index} (length {found})")
            }
            Violation::NonFiniteQuery { index, coord } => {
                write!(f, "non-finite value at query {index}, coordinate {coord}")
            }
            Violation::NonFiniteDatabase { index, coord } => {
                write!(
                    f,
                    "non-finite value at database {index}, coordinate {coord}"
                )
            }
            Violation::RelevanceRows { expected, found } => {
                write!(f, "relevance has {found} rows, expected {expected}")
            }
            Violation::RelevanceColumns {
                row,
                expected,
                found,
            } => write!(
                f,
                "relevance row {row} has {found} columns, expected {expected}"
            ),
            Violation::NonBinaryRelevance { row, col, value } => {
                write!(f, "non-binary relevance at ({row},{col}): {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks raw dataset parts. The reference dimension is the most common
/// vector length across queries and database (first seen wins a tie).
pub fn validate_dataset(
    queries: &[Vec<f64>],
    database: &[Vec<f64>],
    relevance: &[Vec<i64>],
) -> ValidationReport {
    let mut violations = Vec::new();
    if queries.is_empty() {
        violations.push(Violation::NoQueries);
    }
    if database.is_empty() {
        violations.push(Violation::NoDatabase);
    }
    let dim = reference_dim(queries.iter().chain(database).map(|v| v.len()));
    if dim == 0 && !(queries.is_empty() && database.is_empty()) {
        violations.push(Violation::ZeroDimension);
    }
    for (index, q) in queries.iter().enumerate() {
        if q.len() != dim {
            violations.push(Violation::QueryDimension {
                index,
                found: q.len(),
            });
        }
        if let Some(coord) = q.iter().position(|v| !v.is_finite()) {
            violations.push(Violation::NonFiniteQuery { index, coord });
        }
    }
    for (index, x) in database.iter().enumerate() {
        if x.len() != dim {
            violations.push(Violation::DatabaseDimension {
                index,
                found: x.len(),
            });
        }
        if let Some(coord) = x.iter().position(|v| !v.is_finite()) {
            violations.push(Violation::NonFiniteDatabase { index, coord });
        }
    }
    if relevance.len() != queries.len() {
        violations.push(Violation::RelevanceRows {
            expected: queries.len(),
            found: relevance.len(),
        });
    }
    for (row, r) in relevance.iter().enumerate() {
        if r.len() != database.len() {
            violations.push(Violation::RelevanceColumns {
                row,
                expected: database.len(),
                found: r.len(),
            });
        }
        for (col, &value) in r.iter().enumerate() {
            if value != 0 && value != 1 {
                violations.push(Violation::NonBinaryRelevance { row, col, value });
            }
        }
    }
    ValidationReport { violations }
}

fn reference_dim(lengths: impl Iterator<Item = usize>) -> usize {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for len in lengths {
        match counts.iter_mut().find(|(l, _)| *l == len) {
            Some((_, c)) => *c += 1,
            None => counts.push((len, 1)),
        }
    }
    let mut best = (0, 0);
    for &(len, c) in &counts {
        if c > best.1 {
            best = (len, c);
        }
    }
    best.0
}

/// Queries, database items and the binary relevance matrix linking them.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalDataset {
    queries: Vec<FeatureVector>,
    database: Vec<FeatureVector>,
    relevance: Vec<bool>,
    dim: usize,
}

impl RetrievalDataset {
    pub fn new(
        queries: Vec<Vec<f64>>,
        database: Vec<Vec<f64>>,
        relevance: Vec<Vec<i64>>,
    ) -> Result<Self> {
        let report = validate_dataset(&queries, &database, &relevance);
        if !report.is_ok() {
            return Err(Error::InvalidDataset(report));
        }
        let dim = queries[0].len();
        Ok(RetrievalDataset {
            queries: queries.into_iter().map(FeatureVector).collect(),
            database: database.into_iter().map(FeatureVector).collect(),
            relevance: relevance.into_iter().flatten().map(|v| v == 1).collect(),
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_queries(&self) -> usize {
        self.queries.len()
    }

    pub fn n_database(&self) -> usize {
        self.database.len()
    }

    pub fn queries(&self) -> &[FeatureVector] {
        &self.queries
    }

    pub fn database(&self) -> &[FeatureVector] {
        &self.database
    }

    pub fn query(&self, i: usize) -> &FeatureVector {
        &self.queries[i]
    }

    pub fn item(&self, j: usize) -> &FeatureVector {
        &self.database[j]
    }

    pub fn relevance_row(&self, i: usize) -> &[bool] {
        let m = self.database.len();
        &self.relevance[i * m..(i + 1) * m]
    }

    pub fn is_relevant(&self, i: usize, j: usize) -> bool {
        self.relevance[i * self.database.len() + j]
    }

    pub fn relevance_matrix(&self) -> Vec<Vec<i64>> {
        (0..self.n_queries())
            .map(|i| self.relevance_row(i).iter().map(|&r| r as i64).collect())
            .collect()
    }

    /// Copy with every query and database vector scaled to unit norm.
    pub fn l2_normalized(&self) -> RetrievalDataset {
        RetrievalDataset {
            queries: self.queries.iter().map(|q| q.l2_normalized()).collect(),
            database: self.database.iter().map(|x| x.l2_normalized()).collect(),
            relevance: self.relevance.clone(),
            dim: self.dim,
        }
    }

    pub(crate) fn check_query_indices(&self, indices: &[usize]) -> Result<()> {
        for &i in indices {
            if i >= self.n_queries() {
                return Err(Error::IndexOutOfRange {
                    what: "query",
                    index: i,
                    len: self.n_queries(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Trained,
    Identity,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocessing {
    pub l2_normalize: bool,
}

/// Parameters of the bilinear similarity `s(z, x) = zᵀ W x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityModel {
    w: SquareMatrix,
    trained_c: Option<f64>,
    provenance: Provenance,
    preprocessing: Preprocessing,
}

impl SimilarityModel {
    pub fn new(
        w: SquareMatrix,
        provenance: Provenance,
        trained_c: Option<f64>,
        preprocessing: Preprocessing,
    ) -> Result<Self> {
        if w.dim() == 0 {
            return Err(Error::InvalidParameter(
                "model dimension must be ≥ 1".into(),
            ));
        }
        if !w.is_finite() {
            return Err(Error::InvalidParameter(
                "model matrix has non-finite entries".into(),
            ));
        }
        if provenance == Provenance::Identity && w != SquareMatrix::identity(w.dim()) {
            return Err(Error::InvalidParameter(
                "identity provenance requires W = I".into(),
            ));
        }
        Ok(SimilarityModel {
            w,
            trained_c,
            provenance,
            preprocessing,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(
            SquareMatrix::identity(dim),
            Provenance::Identity,
            None,
            Preprocessing::default(),
        )
    }

    /// A model from an arbitrary matrix, e.g. one supplied by a caller.
    pub fn external(w: SquareMatrix) -> Result<Self> {
        Self::new(w, Provenance::External, None, Preprocessing::default())
    }

    pub fn w(&self) -> &SquareMatrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    pub fn trained_c(&self) -> Option<f64> {
        self.trained_c
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
    }

    /// The same model with `W` scaled by `factor`, tagged external.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.w.scaled(factor),
            Provenance::External,
            None,
            self.preprocessing,
        )
    }

    /// Applies the model's recorded preprocessing to a dataset.
    pub fn prepare(&self, ds: &RetrievalDataset) -> RetrievalDataset {
        if self.preprocessing.l2_normalize {
            ds.l2_normalized()
        } else {
            ds.clone()
        }
    }
}

/// Database ordering for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    /// Database indices by descending score, ties by ascending index.
    pub order: Vec<usize>,
    /// Raw scores in database order.
    pub scores: Vec<f64>,
}
