//! The `topsim` command line.
//!
//! Errors go to stderr as `error[<code>]: <message>`. Exit status 2 marks a
//! usage or input error and 3 a numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataio::{
    generate_synthetic, load_dataset, load_model, parse_features, save_dataset, save_model,
    SyntheticKind, SyntheticParams,
};
use crate::domain::{FeatureVector, Preprocessing, Provenance, RetrievalDataset};
use crate::error::{Error, Result};
use crate::qp::{SolverConfig, WorkingSetConfig};
use crate::similarity::{order_by_score, score};
use crate::trainer::{baseline_identity, evaluate, split_queries, train_with, EvaluationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "topsim",
    version,
    about = "Learn and apply bilinear similarities for retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on a split of the queries and report its quality.
    Train(TrainArgs),
    /// Mean top precision of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Rank the database for one query.
    Retrieve(RetrieveArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Write the identity model.
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, value_name = "PATH")]
    queries: PathBuf,
    #[arg(long, value_name = "PATH")]
    database: PathBuf,
    #[arg(long, value_name = "PATH")]
    relevance: PathBuf,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model output path.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Share of queries held out for testing; 0 trains on every query.
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    /// L2-normalize features before training; recorded in the model.
    #[arg(long)]
    normalize: bool,
    /// Keep at most this many irrelevant items per (query, relevant) pair.
    #[arg(long, value_name = "INT")]
    cap_per_pair: Option<usize>,
    /// Working-set refresh period in iterations (with --cap-per-pair).
    #[arg(long, value_name = "INT", default_value_t = 50)]
    refresh_every: usize,
    /// JSON training report.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Query indices to evaluate, separated by commas or newlines.
    #[arg(long, value_name = "PATH")]
    query_indices: Option<PathBuf>,
    /// JSON report with the per-query breakdown.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct RetrieveArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    #[arg(long, value_name = "PATH")]
    database: PathBuf,
    /// Query as one CSV row, e.g. "1,0".
    #[arg(long, value_name = "CSV_ROW", allow_hyphen_values = true, conflicts_with_all = ["query_index", "queries"],
          required_unless_present = "query_index")]
    query_vector: Option<String>,
    /// Row of --queries to use as the query.
    #[arg(long, value_name = "INT", requires = "queries")]
    query_index: Option<usize>,
    #[arg(long, value_name = "PATH", requires = "query_index")]
    queries: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
struct SynthArgs {
    /// separable or rotated.
    #[arg(long, default_value = "separable")]
    kind: String,
    #[arg(long, default_value_t = 40)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    relevant: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

/// Runs one invocation and returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let text = text.trim_start_matches("error: ").trim_end();
            let _ = writeln!(err, "error[usage]: {text}");
            return EXIT_INPUT;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, out, err),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Retrieve(a) => cmd_retrieve(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Baseline(a) => cmd_baseline(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) if e.is_numerical() => {
            let _ = writeln!(err, "error[numerical]: {e}");
            EXIT_NUMERICAL
        }
        Err(e) => {
            let _ = writeln!(err, "error[input]: {e}");
            EXIT_INPUT
        }
    }
}

fn load_data(a: &DataArgs) -> Result<RetrievalDataset> {
    load_dataset(&a.queries, &a.database, &a.relevance)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

#[derive(Debug, Serialize)]
struct TrainReport {
    c: f64,
    train_queries: Vec<usize>,
    test_queries: Vec<usize>,
    triplets: usize,
    dual_objective: f64,
    primal_objective: f64,
    duality_gap: f64,
    relative_gap: f64,
    iterations: usize,
    converged: bool,
    certified: bool,
    train_mean_top_precision: Option<f64>,
    test_mean_top_precision: Option<f64>,
    warnings: Vec<String>,
}

/// Mean top precision, or `None` when no query in the subset is evaluable.
fn optional_mtp(
    ds: &RetrievalDataset,
    model: &crate::domain::SimilarityModel,
    queries: &[usize],
) -> Result<Option<f64>> {
    if queries.is_empty() {
        return Ok(None);
    }
    match evaluate(ds, model, queries) {
        Ok(r) => Ok(Some(r.mean_top_precision)),
        Err(Error::NoEvaluableQueries) => Ok(None),
        Err(e) => Err(e),
    }
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if !(a.c > 0.0 && a.c.is_finite()) {
        return Err(Error::InvalidParameter("C must be positive".into()));
    }
    let ds = load_data(&a.data)?;
    let n = ds.n_queries();
    let mut warnings = Vec::new();
    let (train_q, test_q) = if a.test_fraction == 0.0 {
        ((0..n).collect(), Vec::new())
    } else if n < 2 {
        warnings.push("a single query cannot be split; training on it".to_string());
        ((0..n).collect(), Vec::new())
    } else {
        split_queries(n, a.test_fraction, a.seed)?
    };
    let cfg = SolverConfig {
        c: a.c,
        max_iterations: a.max_iters,
        rel_tol: a.rel_tol,
        kkt_tol: a.kkt_tol,
        working_set: a.cap_per_pair.map(|cap| WorkingSetConfig {
            cap_per_pair: cap,
            refresh_every: a.refresh_every,
        }),
        ..SolverConfig::default()
    };
    let preprocessing = Preprocessing {
        l2_normalize: a.normalize,
    };
    let trained = train_with(&ds, &train_q, &cfg, preprocessing)?;
    warnings.extend(trained.warnings.iter().cloned());
    save_model(&trained.model, &a.out)?;

    let report = TrainReport {
        c: a.c,
        triplets: trained.solution.triplets.len(),
        dual_objective: trained.certificate.dual_objective,
        primal_objective: trained.certificate.primal_objective,
        duality_gap: trained.certificate.duality_gap,
        relative_gap: trained.certificate.relative_gap,
        iterations: trained.solution.iterations,
        converged: trained.solution.converged,
        certified: trained.certificate.certified,
        train_mean_top_precision: optional_mtp(&ds, &trained.model, &train_q)?,
        test_mean_top_precision: optional_mtp(&ds, &trained.model, &test_q)?,
        train_queries: train_q,
        test_queries: test_q,
        warnings,
    };
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    writeln!(
        out,
        "dual_objective: {:.9}\nduality_gap: {:.3e}\niterations: {}\nconverged: {}\n\
         train_mean_top_precision: {}\ntest_mean_top_precision: {}",
        report.dual_objective,
        report.duality_gap,
        report.iterations,
        report.converged,
        fmt(report.train_mean_top_precision),
        fmt(report.test_mean_top_precision),
    )
    .map_err(io_err)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn read_indices(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::parse(path, format!("invalid query index {s:?}")))
        })
        .collect()
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_data(&a.data)?;
    let queries = match &a.query_indices {
        Some(p) => read_indices(p)?,
        None => (0..ds.n_queries()).collect(),
    };
    let report: EvaluationReport = evaluate(&ds, &model, &queries)?;
    writeln!(
        out,
        "mean_top_precision: {:.6}\nevaluated: {}\nskipped: {}",
        report.mean_top_precision,
        report.evaluated,
        report.skipped.len()
    )
    .map_err(io_err)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn format_score(s: f64) -> String {
    let text = format!("{s:.6}");
    match text.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => text,
    }
}

fn cmd_retrieve(a: RetrieveArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let database = parse_features(
        &a.database,
        &fs::read_to_string(&a.database).map_err(|source| Error::Io {
            path: a.database.clone(),
            source,
        })?,
    )?;
    let query = match (&a.query_vector, a.query_index, &a.queries) {
        (Some(row), _, _) => {
            let values = parse_features(Path::new("--query-vector"), row)?;
            match values.as_slice() {
                [v] => v.clone(),
                _ => {
                    return Err(Error::InvalidParameter(
                        "--query-vector must be a single CSV row".into(),
                    ))
                }
            }
        }
        (None, Some(i), Some(path)) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let rows = parse_features(path, &text)?;
            rows.get(i).cloned().ok_or(Error::IndexOutOfRange {
                what: "query",
                index: i,
                len: rows.len(),
            })?
        }
        _ => {
            return Err(Error::InvalidParameter(
                "give --query-vector or --query-index with --queries".into(),
            ))
        }
    };
    let prep = |v: Vec<f64>| -> Result<FeatureVector> {
        let fv = FeatureVector::new(v)?;
        Ok(if model.preprocessing().l2_normalize {
            fv.l2_normalized()
        } else {
            fv
        })
    };
    let z = prep(query)?;
    let items: Vec<FeatureVector> = database.into_iter().map(prep).collect::<Result<_>>()?;
    let scores: Vec<f64> = items
        .iter()
        .map(|x| score(&z, x, &model))
        .collect::<Result<_>>()?;
    for (rank, j) in order_by_score(&scores).into_iter().take(a.top).enumerate() {
        writeln!(out, "{},{},{}", rank + 1, j, format_score(scores[j])).map_err(io_err)?;
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let kind: SyntheticKind = a.kind.parse()?;
    let params = SyntheticParams {
        kind,
        n: a.n,
        m: a.m,
        d: a.d,
        relevant_per_query: a.relevant,
        noise: a.noise,
        seed: a.seed,
    };
    let syn = generate_synthetic(&params)?;
    save_dataset(&syn.dataset, &a.out_dir)?;
    writeln!(
        out,
        "wrote {} queries, {} database items (d = {}) to {}",
        syn.dataset.n_queries(),
        syn.dataset.n_database(),
        syn.dataset.dim(),
        a.out_dir.display()
    )
    .map_err(io_err)
}

fn cmd_baseline(a: BaselineArgs, out: &mut dyn Write) -> Result<()> {
    let model = baseline_identity(a.d)?;
    debug_assert_eq!(model.provenance(), Provenance::Identity);
    save_model(&model, &a.out)?;
    writeln!(
        out,
        "wrote identity model (d = {}) to {}",
        a.d,
        a.out.display()
    )
    .map_err(io_err)
}
