use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn topsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Data {
    dir: tempfile::TempDir,
}

impl Data {
    fn new(q: &str, x: &str, r: &str) -> Data {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("queries.csv"), q).unwrap();
        fs::write(dir.path().join("database.csv"), x).unwrap();
        fs::write(dir.path().join("relevance.csv"), r).unwrap();
        Data { dir }
    }

    fn synth(extra: &[&str]) -> Data {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["synth", "--out-dir", s(dir.path())];
        args.extend_from_slice(extra);
        let o = topsim(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        Data { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn flags(&self) -> Vec<String> {
        ["queries", "database", "relevance"]
            .iter()
            .flat_map(|f| {
                [
                    format!("--{f}"),
                    s(&self.path(&format!("{f}.csv"))).to_string(),
                ]
            })
            .collect()
    }

    fn run(&self, head: &[&str]) -> Output {
        let flags = self.flags();
        let mut args: Vec<&str> = head.to_vec();
        args.extend(flags.iter().map(String::as_str));
        topsim(&args)
    }
}

fn toy() -> Data {
    Data::new("1\n", "2\n1\n", "1,0\n")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_toy_reports_closed_form_objective() {
    let d = toy();
    let model = d.path("model.json");
    let report = d.path("report.json");
    let o = d.run(&[
        "train",
        "--c",
        "0.5",
        "--out",
        s(&model),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&report);
    assert!((r["dual_objective"].as_f64().unwrap() - 0.375).abs() < 1e-12);
    assert!(r["duality_gap"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(r["converged"], true);
    // A single query cannot be split, so it is trained on with a warning.
    assert!(stderr(&o).contains("warning:"));
    let m = read_json(&model);
    assert_eq!(m["W"][0].as_f64(), Some(0.5));
    assert_eq!(m["provenance"], "trained");
    assert_eq!(m["trained_C"].as_f64(), Some(0.5));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let o = topsim(&[
        "train",
        "--queries",
        "q.csv",
        "--database",
        "x.csv",
        "--out",
        "m.json",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[usage]:"), "{err}");
    assert!(err.contains("--relevance"), "{err}");
}

#[test]
fn negative_c_is_rejected() {
    let d = toy();
    let o = d.run(&["train", "--c", "-1", "--out", s(&d.path("m.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("C must be positive"), "{}", stderr(&o));
    assert!(!d.path("m.json").exists());
}

#[test]
fn overflowing_features_are_a_numerical_failure() {
    let d = Data::new("1e200\n", "1e200\n-1e200\n", "1,0\n");
    let o = d.run(&["train", "--out", s(&d.path("m.json"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[numerical]:"));
}

#[test]
fn malformed_inputs_exit_two() {
    let d = Data::new("1.0,2.0\n", "0.5,0.5\n1.0,0.0,3.0\n", "1,0\n");
    let o = d.run(&["train", "--out", s(&d.path("m.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("inconsistent dimension at line 2"),
        "{}",
        stderr(&o)
    );

    let d = Data::new("1.0,2.0\n", "0.5,0.5\n1.0,0.0\n", "2,0\n");
    let o = d.run(&["train", "--out", s(&d.path("m.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(0,0)"));
}

fn baseline(dir: &Path, d: usize) -> PathBuf {
    let path = dir.join(format!("identity{d}.json"));
    let o = topsim(&["baseline", "--d", &d.to_string(), "--out", s(&path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

#[test]
fn identity_baseline_on_separable_synthetic() {
    let d = Data::synth(&["--seed", "7"]);
    let model = baseline(d.dir.path(), 16);
    let report = d.path("eval.json");
    let o = d.run(&["evaluate", "--model", s(&model), "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean_top_precision: 1.000000"));
    let r = read_json(&report);
    assert_eq!(r["mean_top_precision"].as_f64(), Some(1.0));
    assert_eq!(r["provenance"], "identity");
    assert_eq!(r["per_query"].as_array().unwrap().len(), 40);

    let noisy = Data::synth(&["--seed", "7", "--noise", "0.5"]);
    let o = noisy.run(&["evaluate", "--model", s(&model), "--report", s(&report)]);
    assert!(
        stdout(&o).contains("mean_top_precision: 0.080000"),
        "{}",
        stdout(&o)
    );
    assert_eq!(
        read_json(&report)["mean_top_precision"].as_f64(),
        Some(0.07999999999999999)
    );
}

#[test]
fn evaluate_on_a_query_subset() {
    let d = Data::synth(&["--seed", "7", "--noise", "0.5"]);
    let model = baseline(d.dir.path(), 16);
    let idx = d.path("idx.txt");
    fs::write(&idx, "1\n6\n8\n9\n17\n19\n21\n27\n28\n29\n36\n38\n").unwrap();
    let report = d.path("eval.json");
    let o = d.run(&[
        "evaluate",
        "--model",
        s(&model),
        "--query-indices",
        s(&idx),
        "--report",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        read_json(&report)["mean_top_precision"].as_f64(),
        Some(0.11666666666666665)
    );
}

#[test]
fn evaluate_errors() {
    let d = Data::new("1,0,0\n", "1,0,0\n0,1,0\n", "1,0\n");
    let model = baseline(d.dir.path(), 2);
    let o = d.run(&["evaluate", "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[input]:"));

    let d = Data::new("1\n2\n", "1\n0\n", "0,0\n0,0\n");
    let model = baseline(d.dir.path(), 1);
    let o = d.run(&["evaluate", "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no evaluable queries"));
}

#[test]
fn retrieve_ranks_with_index_tie_break() {
    let dir = tempfile::tempdir().unwrap();
    let model = baseline(dir.path(), 2);
    let db = dir.path().join("db.csv");
    fs::write(&db, "1,0\n0,1\n").unwrap();
    let o = topsim(&[
        "retrieve",
        "--model",
        s(&model),
        "--database",
        s(&db),
        "--query-vector",
        "1,0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), "1,0,1.000000\n2,1,0.000000\n");

    let o = topsim(&[
        "retrieve",
        "--model",
        s(&model),
        "--database",
        s(&db),
        "--query-vector",
        "1,0",
        "--top",
        "1",
    ]);
    assert_eq!(stdout(&o), "1,0,1.000000\n");

    let o = topsim(&[
        "retrieve",
        "--model",
        s(&model),
        "--database",
        s(&db),
        "--query-vector",
        "1,1",
    ]);
    assert_eq!(stdout(&o), "1,0,1.000000\n2,1,1.000000\n");

    let o = topsim(&[
        "retrieve",
        "--model",
        s(&model),
        "--database",
        s(&db),
        "--query-vector",
        "-1,0",
    ]);
    assert_eq!(stdout(&o), "1,1,0.000000\n2,0,-1.000000\n");
}

#[test]
fn retrieve_by_query_index() {
    let dir = tempfile::tempdir().unwrap();
    let model = baseline(dir.path(), 2);
    let db = dir.path().join("db.csv");
    let q = dir.path().join("q.csv");
    fs::write(&db, "1,0\n0,1\n").unwrap();
    fs::write(&q, "1,0\n0,2\n").unwrap();
    let o = topsim(&[
        "retrieve",
        "--model",
        s(&model),
        "--database",
        s(&db),
        "--queries",
        s(&q),
        "--query-index",
        "1",
    ]);
    assert_eq!(stdout(&o), "1,1,2.000000\n2,0,0.000000\n");
    let o = topsim(&[
        "retrieve",
        "--model",
        s(&model),
        "--database",
        s(&db),
        "--queries",
        s(&q),
        "--query-index",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn retrieve_rejects_malformed_query() {
    let dir = tempfile::tempdir().unwrap();
    let model = baseline(dir.path(), 2);
    let db = dir.path().join("db.csv");
    fs::write(&db, "1,0\n0,1\n").unwrap();
    for bad in ["1,x", "1,0,0", "1"] {
        let o = topsim(&[
            "retrieve",
            "--model",
            s(&model),
            "--database",
            s(&db),
            "--query-vector",
            bad,
        ]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
    let o = topsim(&["retrieve", "--model", s(&model), "--database", s(&db)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_is_deterministic_and_reloads() {
    let a = Data::synth(&["--seed", "7"]);
    let b = Data::synth(&["--seed", "7"]);
    for f in ["queries.csv", "database.csv", "relevance.csv"] {
        assert_eq!(
            fs::read(a.path(f)).unwrap(),
            fs::read(b.path(f)).unwrap(),
            "{f}"
        );
    }
    let ds = topsim::dataio::load_dataset_dir(a.dir.path()).unwrap();
    assert_eq!((ds.n_queries(), ds.n_database(), ds.dim()), (40, 100, 16));
}

#[test]
fn synth_rejects_bad_parameters() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [
        vec!["--relevant", "5", "--m", "5"],
        vec!["--kind", "spiral"],
        vec!["--noise", "-1"],
        vec!["--d", "0"],
    ] {
        let mut args = vec!["synth", "--out-dir", s(dir.path())];
        args.extend_from_slice(&bad);
        assert_eq!(topsim(&args).status.code(), Some(2), "{bad:?}");
    }
}

#[test]
fn train_then_evaluate_pipeline() {
    let d = Data::synth(&[
        "--kind",
        "rotated",
        "--n",
        "12",
        "--m",
        "30",
        "--d",
        "4",
        "--relevant",
        "3",
        "--seed",
        "1",
    ]);
    let model = d.path("model.json");
    let report = d.path("train.json");
    let o = d.run(&[
        "train",
        "--out",
        s(&model),
        "--report",
        s(&report),
        "--normalize",
        "--cap-per-pair",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&report);
    assert_eq!(
        r["train_queries"].as_array().unwrap().len() + r["test_queries"].as_array().unwrap().len(),
        12
    );
    assert!(r["test_mean_top_precision"].as_f64().is_some());
    assert_eq!(read_json(&model)["preprocessing"]["l2_normalize"], true);

    let o = d.run(&["evaluate", "--model", s(&model)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("mean_top_precision: "));
}

#[test]
fn help_and_version() {
    assert_eq!(topsim(&["--help"]).status.code(), Some(0));
    assert_eq!(topsim(&["--version"]).status.code(), Some(0));
    assert_eq!(topsim(&["frobnicate"]).status.code(), Some(2));
}
