use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use asrl_bench::commands::{parse_scatter, LOSS_ORDER};
use asrl_bench::report::KvReport;
use asrl_core::{metrics, GbdtModel};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asrl-bench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// 20 rows, `y = 2a - b` plus a deterministic wobble.
fn toy_file(dir: &Path) -> PathBuf {
    let mut text = String::from("a,b,y\n");
    for i in 0..20 {
        let a = i as f64 / 4.0;
        let b = ((i * 7) % 5) as f64;
        let y = 2.0 * a - b + 0.1 * ((i % 3) as f64 - 1.0);
        text.push_str(&format!("{a},{b},{y}\n"));
    }
    let path = dir.join("toy.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn bench_toy(dir: &Path, out: &str, extra: &[&str]) -> KvReport {
    let toy = toy_file(dir);
    let out = dir.join(out);
    let mut args = vec![
        "bench",
        "--dataset",
        toy.to_str().unwrap(),
        "--target",
        "y",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    KvReport::read(&out).unwrap()
}

#[test]
fn toy_bench_is_fast_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let report = bench_toy(dir.path(), "r.txt", &[]);
    assert!(start.elapsed().as_secs_f64() < 1.0, "{:?}", start.elapsed());
    assert_eq!(report.get("format_version"), Some("1"));
    assert_eq!(report.get("dataset"), Some("toy"));
    assert_eq!(report.get("n_train"), Some("16"));
    assert_eq!(report.get("n_test"), Some("4"));
    assert_eq!(report.get("losses"), Some("asrl,squared,absolute,huber"));
    assert_eq!(report.get("controlled_comparison"), Some("ok"));
    let split = report.require("split_hash").unwrap();
    let config = report.require("config_hash").unwrap();
    for loss in LOSS_ORDER {
        assert_eq!(report.get(&format!("loss.{loss}.split_hash")), Some(split));
        assert_eq!(
            report.get(&format!("loss.{loss}.config_hash")),
            Some(config)
        );
        for metric in ["mse", "mae", "r2", "recall", "train_seconds"] {
            let v = report
                .require_f64(&format!("loss.{loss}.{metric}"))
                .unwrap();
            assert!(v.is_finite(), "{loss}.{metric}");
        }
    }
}

#[test]
fn zero_rounds_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let report = bench_toy(dir.path(), "r.txt", &["--rounds", "0"]);
    for metric in ["mse", "mae", "r2", "recall"] {
        let values: Vec<&str> = LOSS_ORDER
            .iter()
            .map(|l| report.get(&format!("loss.{l}.{metric}")).unwrap())
            .collect();
        assert!(
            values.iter().all(|v| *v == values[0]),
            "{metric}: {values:?}"
        );
    }
}

#[test]
fn reports_reproduce_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let a = bench_toy(dir.path(), "a.txt", &["--seed", "5"]);
    let b = bench_toy(dir.path(), "b.txt", &["--seed", "5"]);
    assert_eq!(a.render_without_timing(), b.render_without_timing());
    let c = bench_toy(dir.path(), "c.txt", &["--seed", "5", "--concurrent"]);
    assert_eq!(c.get("concurrent"), Some("true"));
    for loss in LOSS_ORDER {
        let key = format!("loss.{loss}.mse");
        assert_eq!(a.get(&key), c.get(&key));
    }
    let d = bench_toy(dir.path(), "d.txt", &["--seed", "6"]);
    assert_ne!(a.get("split_hash"), d.get("split_hash"));
}

#[test]
fn summary_merges_with_later_file_winning() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.txt");
    let second = dir.path().join("second.txt");
    let other = dir.path().join("other.txt");
    let body = |name: &str, mse: f64| {
        let mut r = KvReport::new();
        r.push("dataset", name);
        for (i, l) in LOSS_ORDER.iter().enumerate() {
            r.push(format!("loss.{l}.mse"), mse + i as f64);
        }
        r.render()
    };
    std::fs::write(&first, body("toy", 1.0)).unwrap();
    std::fs::write(&other, body("other", 10.0)).unwrap();
    std::fs::write(&second, body("toy", 5.0)).unwrap();
    let o = run(&[
        "summary",
        first.to_str().unwrap(),
        other.to_str().unwrap(),
        second.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "dataset,asrl,squared,absolute,huber\ntoy,5,6,7,8\nother,10,11,12,13\n"
    );
    let err = stderr(&o);
    assert!(
        err.contains("warning[W_DUPLICATE]") && err.contains("second.txt"),
        "{err}"
    );

    let single = run(&["summary", other.to_str().unwrap()]);
    assert_eq!(stdout(&single).lines().count(), 2);
}

#[test]
fn summary_names_unreadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.txt");
    let o = run(&["summary", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(
        err.starts_with("error[E_DATA]") && err.contains("missing.txt"),
        "{err}"
    );
    assert_eq!(err.trim_end().lines().count(), 1);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "format_version=1\ndataset=x\n").unwrap();
    let o = run(&["summary", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("loss.asrl.mse"));
}

#[test]
fn losscurve_reference_grid() {
    let o = run(&[
        "losscurve",
        "--delta1",
        "1",
        "--delta2",
        "3",
        "--range",
        "5",
        "--step",
        "1",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<(f64, f64, String)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && *l != "r,loss,region")
        .map(|l| {
            let parts: Vec<&str> = l.split(',').collect();
            (
                parts[0].parse().unwrap(),
                parts[1].parse().unwrap(),
                parts[2].to_string(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 11);
    let at = |r: f64| rows.iter().find(|p| p.0 == r).unwrap();
    assert_eq!(at(0.0).1, 0.0);
    assert_eq!(at(2.0).1, 2.0);
    assert_eq!(at(2.0).2, "linear");
    assert_eq!(at(4.0).1, 5f64.ln());
    assert_eq!(at(-4.0).2, "logarithmic");
    assert!(text.contains("# boundary |r|=1") && text.contains("# boundary |r|=3"));
}

#[test]
fn losscurve_rejects_invalid_state() {
    let o = run(&["losscurve", "--delta1", "3", "--delta2", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[E_USAGE]"));
    let o = run(&["losscurve", "--alpha", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["losscurve", "--step", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn scatter_matches_bench_mse_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let report = bench_toy(dir.path(), "r.txt", &[]);
    let toy = dir.path().join("toy.csv");
    let o = run(&[
        "scatter",
        "--dataset",
        toy.to_str().unwrap(),
        "--target",
        "y",
        "--loss",
        "asrl",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (truth, predicted) = parse_scatter(&stdout(&o)).unwrap();
    assert_eq!(truth.len(), 4);
    let mse = metrics::mse(&truth, &predicted).unwrap();
    assert_eq!(mse, report.require_f64("loss.asrl.mse").unwrap());
}

#[test]
fn scatter_with_zero_rounds_predicts_a_constant() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_file(dir.path());
    let model = dir.path().join("m.json");
    let o = run(&[
        "scatter",
        "--dataset",
        toy.to_str().unwrap(),
        "--target",
        "y",
        "--rounds",
        "0",
        "--model-out",
        model.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let (_, predicted) = parse_scatter(&stdout(&o)).unwrap();
    assert!(predicted.iter().all(|p| *p == predicted[0]));
    let m = GbdtModel::load(&model).unwrap();
    assert_eq!(m.base_score(), predicted[0]);
}

#[test]
fn saved_models_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let models = dir.path().join("models");
    bench_toy(
        dir.path(),
        "r.txt",
        &["--model-dir", models.to_str().unwrap()],
    );
    for loss in LOSS_ORDER {
        let m = GbdtModel::load(&models.join(format!("toy-{loss}.json"))).unwrap();
        assert_eq!(m.feature_names(), ["a", "b"]);
    }
}

#[test]
fn error_paths_are_single_tagged_lines() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_file(dir.path());
    let cases: Vec<(Vec<&str>, i32, &str)> = vec![
        (
            vec!["bench", "--dataset", toy.to_str().unwrap()],
            2,
            "E_USAGE",
        ),
        (vec!["bench", "--dataset", "no-such-dataset"], 3, "E_DATA"),
        (
            vec![
                "bench",
                "--dataset",
                toy.to_str().unwrap(),
                "--target",
                "zz",
            ],
            3,
            "E_DATA",
        ),
        (
            vec![
                "bench",
                "--dataset",
                "concrete",
                "--q-low",
                "0.9",
                "--q-high",
                "0.5",
            ],
            2,
            "E_USAGE",
        ),
        (
            vec!["bench", "--dataset", "concrete", "--test-fraction", "1"],
            2,
            "E_USAGE",
        ),
        (
            vec![
                "bench",
                "--dataset",
                "concrete",
                "--data-dir",
                dir.path().to_str().unwrap(),
            ],
            3,
            "E_DATA",
        ),
        (vec!["frobnicate"], 2, "E_USAGE"),
        (vec!["bench"], 2, "E_USAGE"),
    ];
    for (args, code, tag) in cases {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
        let err = stderr(&o);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(
            err.starts_with(&format!("error[{tag}]: ")),
            "{args:?}: {err}"
        );
    }
}

#[test]
fn help_exits_cleanly() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("losscurve"));
}
