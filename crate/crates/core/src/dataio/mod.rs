//! Dataset files, model files and synthetic datasets.
//!
//! Feature files are header-less CSV with one vector per row. The relevance
//! file is CSV of 0/1 integers with one row per query and one column per
//! database item.

mod model_file;
mod synthetic;

pub use model_file::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use synthetic::{generate_synthetic, SyntheticDataset, SyntheticKind, SyntheticParams};

use std::fs;
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, Trim};

use crate::domain::RetrievalDataset;
use crate::error::{Error, Result};

/// Paths of a dataset on disk together with the parsed dataset.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub queries_path: PathBuf,
    pub database_path: PathBuf,
    pub relevance_path: PathBuf,
    pub dataset: RetrievalDataset,
}

impl DatasetBundle {
    pub fn load(
        queries_path: impl Into<PathBuf>,
        database_path: impl Into<PathBuf>,
        relevance_path: impl Into<PathBuf>,
    ) -> Result<Self> {
        let queries_path = queries_path.into();
        let database_path = database_path.into();
        let relevance_path = relevance_path.into();
        let dataset = load_dataset(&queries_path, &database_path, &relevance_path)?;
        Ok(DatasetBundle {
            queries_path,
            database_path,
            relevance_path,
            dataset,
        })
    }

    /// Conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        (
            dir.join("queries.csv"),
            dir.join("database.csv"),
            dir.join("relevance.csv"),
        )
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses header-less CSV text into rows of fields; `(line, fields)` per row.
fn csv_rows(path: &Path, text: &str) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// Parses a feature file. All rows must share the first row's length.
pub fn parse_features(path: &Path, text: &str) -> Result<Vec<Vec<f64>>> {
    let rows = csv_rows(path, text)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut width = None;
    for (line, fields) in rows {
        if *width.get_or_insert(fields.len()) != fields.len() {
            return Err(Error::parse(
                path,
                format!("inconsistent dimension at line {line}"),
            ));
        }
        let mut values = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(
                    path,
                    format!(
                        "invalid number {field:?} at line {line}, column {}",
                        col + 1
                    ),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    format!("non-finite value at line {line}, column {}", col + 1),
                ));
            }
            values.push(v);
        }
        out.push(values);
    }
    Ok(out)
}

/// Parses a relevance file of 0/1 integers.
pub fn parse_relevance(path: &Path, text: &str) -> Result<Vec<Vec<i64>>> {
    let rows = csv_rows(path, text)?;
    let mut out = Vec::with_capacity(rows.len());
    for (row, (line, fields)) in rows.into_iter().enumerate() {
        let mut values = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let v: i64 = field.parse().map_err(|_| {
                Error::parse(
                    path,
                    format!(
                        "invalid integer {field:?} at line {line}, column {}",
                        col + 1
                    ),
                )
            })?;
            if v != 0 && v != 1 {
                return Err(Error::parse(
                    path,
                    format!("non-binary relevance {v} at ({row},{col})"),
                ));
            }
            values.push(v);
        }
        out.push(values);
    }
    Ok(out)
}

pub fn load_dataset(
    queries_path: &Path,
    database_path: &Path,
    relevance_path: &Path,
) -> Result<RetrievalDataset> {
    let queries = parse_features(queries_path, &read_to_string(queries_path)?)?;
    let database = parse_features(database_path, &read_to_string(database_path)?)?;
    let relevance = parse_relevance(relevance_path, &read_to_string(relevance_path)?)?;
    if let (Some(q), Some(x)) = (queries.first(), database.first()) {
        if q.len() != x.len() {
            return Err(Error::parse(
                database_path,
                format!(
                    "inconsistent dimension at line 1: database has {} columns, queries have {}",
                    x.len(),
                    q.len()
                ),
            ));
        }
    }
    RetrievalDataset::new(queries, database, relevance)
}

/// Loads the conventional `queries.csv`, `database.csv` and `relevance.csv`.
pub fn load_dataset_dir(dir: &Path) -> Result<RetrievalDataset> {
    let (q, x, r) = DatasetBundle::in_dir(dir);
    load_dataset(&q, &x, &r)
}

/// Shortest decimal that parses back to the same `f64`.
fn format_row(values: &[f64]) -> String {
    let fields: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    fields.join(",")
}

pub fn features_to_csv<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    out
}

pub fn relevance_to_csv(ds: &RetrievalDataset) -> String {
    let mut out = String::new();
    for i in 0..ds.n_queries() {
        let fields: Vec<&str> = ds
            .relevance_row(i)
            .iter()
            .map(|&r| if r { "1" } else { "0" })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `queries.csv`, `database.csv` and `relevance.csv` into `dir`,
/// creating it if needed.
pub fn save_dataset(ds: &RetrievalDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let (q, x, r) = DatasetBundle::in_dir(dir);
    write(
        &q,
        &features_to_csv(ds.queries().iter().map(|v| v.as_slice())),
    )?;
    write(
        &x,
        &features_to_csv(ds.database().iter().map(|v| v.as_slice())),
    )?;
    write(&r, &relevance_to_csv(ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn files(q: &str, x: &str, r: &str) -> (tempfile::TempDir, PathBuf, PathBuf, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let (qp, xp, rp) = DatasetBundle::in_dir(dir.path());
        fs::write(&qp, q).unwrap();
        fs::write(&xp, x).unwrap();
        fs::write(&rp, r).unwrap();
        (dir, qp, xp, rp)
    }

    #[test]
    fn minimal_parse() {
        let (_dir, q, x, r) = files("1.0,2.0\n", "0.5,0.5\n1.0,0.0\n", "1,0\n");
        let ds = load_dataset(&q, &x, &r).unwrap();
        assert_eq!((ds.n_queries(), ds.n_database(), ds.dim()), (1, 2, 2));
        assert!(ds.is_relevant(0, 0));
        assert!(!ds.is_relevant(0, 1));
    }

    #[test]
    fn crlf_and_missing_trailing_newline() {
        let (_dir, q, x, r) = files("1.0, 2.0\r\n3,4", "0.5,0.5\r\n", "1\r\n0");
        let ds = load_dataset(&q, &x, &r).unwrap();
        assert_eq!(ds.n_queries(), 2);
        assert_eq!(ds.query(1).as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn non_binary_relevance_names_coordinates() {
        let (_dir, q, x, r) = files("1.0,2.0\n", "0.5,0.5\n1.0,0.0\n", "2,0\n");
        let err = load_dataset(&q, &x, &r).unwrap_err().to_string();
        assert!(err.contains("(0,0)"), "{err}");
    }

    #[test]
    fn ragged_database_row_names_line() {
        let (_dir, q, x, r) = files("1.0,2.0\n", "0.5,0.5\n1.0,0.0,3.0\n", "1,0\n");
        let err = load_dataset(&q, &x, &r).unwrap_err().to_string();
        assert!(err.contains("inconsistent dimension at line 2"), "{err}");
    }

    #[test]
    fn non_numeric_field_names_line_and_column() {
        let (_dir, q, x, r) = files("1.0,abc\n", "0.5,0.5\n", "1\n");
        let err = load_dataset(&q, &x, &r).unwrap_err().to_string();
        assert!(err.contains("line 1, column 2"), "{err}");
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let (_dir, q, x, r) = files("1.0,2.0\n", "0.5\n", "1\n");
        assert!(load_dataset(&q, &x, &r).is_err());
        let (_dir, q, x, r) = files("1.0\n2.0\n", "0.5\n", "1\n");
        assert!(load_dataset(&q, &x, &r).is_err());
        let (_dir, q, x, r) = files("1.0\n", "0.5\n0.7\n", "1\n");
        assert!(load_dataset(&q, &x, &r).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nope.csv");
        assert!(matches!(load_dataset(&p, &p, &p), Err(Error::Io { .. })));
    }

    proptest! {
        #[test]
        fn save_then_load_is_bit_exact(
            q in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..4),
            x in proptest::collection::vec(proptest::collection::vec(-1e-6f64..1e-6, 3), 1..5),
            bits in proptest::collection::vec(0i64..2, 20),
        ) {
            let m = x.len();
            let rel: Vec<Vec<i64>> = (0..q.len()).map(|i| bits[i * m..(i + 1) * m].to_vec()).collect();
            let ds = RetrievalDataset::new(q, x, rel).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_dataset(&ds, dir.path()).unwrap();
            prop_assert_eq!(load_dataset_dir(dir.path()).unwrap(), ds);
        }
    }
}
