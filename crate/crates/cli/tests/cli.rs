//! End-to-end tests of the `polyfit` binary: command output, exit codes,
//! report shapes, and the stability of the serialized format.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyfit_cli::report::{BENCH_HEADER, SWEEP_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyfit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn polyfit")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tmp_dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn write_csv(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn linear_csv(dir: &Path) -> PathBuf {
    write_csv(dir, "linear.csv", "1,2\n2,2\n3,2\n4,2\n")
}

fn wavy_csv(dir: &Path, n: usize) -> PathBuf {
    let mut s = String::from("key,measure\n");
    for i in 0..n {
        let k = i as f64 * 0.5;
        s.push_str(&format!("{k},{}\n", ((i * 37) % 19) as f64 + 1.0));
    }
    write_csv(dir, "wavy.csv", &s)
}

#[test]
fn build_linear_reports_one_segment() {
    let dir = tmp_dir();
    let csv = linear_csv(dir.path());
    let out_path = dir.path().join("idx.pfix");
    let out = run(&[
        "build",
        "--input",
        csv.to_str().unwrap(),
        "--agg",
        "sum",
        "--deg",
        "1",
        "--delta",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("segments: 1"), "{text}");
    assert!(text.contains("bytes: "), "{text}");
    assert!(out_path.exists());
}

#[test]
fn query_guarantee_mismatch_exits_3() {
    let dir = tmp_dir();
    let csv = linear_csv(dir.path());
    let idx = dir.path().join("idx.pfix");
    run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "1", "--delta", "1",
        "--out", idx.to_str().unwrap(),
    ]);
    let out = run(&[
        "query", "--index", idx.to_str().unwrap(), "--range", "1:4", "--mode", "abs", "--eps", "5",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // eps = 2 * delta passes.
    let ok = run(&[
        "query", "--index", idx.to_str().unwrap(), "--range", "1:4", "--mode", "abs", "--eps", "2",
    ]);
    assert!(ok.status.success());
    let text = stdout(&ok);
    assert!(text.contains("value: "), "{text}");
    assert!(text.contains("refined: false"), "{text}");
}

#[test]
fn query_verify_reports_exact_within_eps() {
    let dir = tmp_dir();
    let csv = wavy_csv(dir.path(), 400);
    let idx = dir.path().join("idx.pfix");
    run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "2", "--delta", "8",
        "--out", idx.to_str().unwrap(),
    ]);
    let out = run(&[
        "query", "--index", idx.to_str().unwrap(), "--range", "10:150", "--mode", "abs", "--eps",
        "16", "--verify", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let err_line = text
        .lines()
        .find(|l| l.starts_with("abs_error: "))
        .expect("abs_error line");
    let err: f64 = err_line["abs_error: ".len()..].parse().unwrap();
    assert!(err <= 16.0, "{text}");
}

#[test]
fn sweep_emits_full_grid() {
    let dir = tmp_dir();
    let csv = wavy_csv(dir.path(), 300);
    let report = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--input", csv.to_str().unwrap(), "--degs", "1,2", "--deltas", "5,10,20",
        "--eps-rel", "0.01", "--queries", "50", "--report", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 3);
}

#[test]
fn bench_report_has_fixed_header_and_bounded_abs_error() {
    let dir = tmp_dir();
    let csv = wavy_csv(dir.path(), 500);
    let idx = dir.path().join("idx.pfix");
    run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "2", "--delta", "6",
        "--out", idx.to_str().unwrap(),
    ]);
    let report = dir.path().join("bench.csv");
    let out = run(&[
        "bench", "--index", idx.to_str().unwrap(), "--workload-seed", "7", "--queries", "300",
        "--eps-rel", "0.01", "--report", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], BENCH_HEADER);
    assert_eq!(lines.len(), 3); // header + abs row + rel row
    let abs_fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(abs_fields[3], "abs");
    let eps: f64 = abs_fields[2].parse().unwrap();
    let max_abs_err: f64 = abs_fields[10].parse().unwrap();
    assert!(max_abs_err <= eps, "{} > {}", max_abs_err, eps);
    // The relative row's unrefined answers must respect eps_rel; refined
    // answers are exact so max_rel_err is bounded by eps_rel as well.
    let rel_fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(rel_fields[3], "rel");
    let max_rel_err: f64 = rel_fields[11].parse().unwrap();
    assert!(max_rel_err <= 0.01 + 1e-12, "{max_rel_err}");
}

#[test]
fn inspect_dumps_header_and_histogram() {
    let dir = tmp_dir();
    let csv = wavy_csv(dir.path(), 200);
    let idx = dir.path().join("idx.pfix");
    run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "1", "--delta", "4",
        "--out", idx.to_str().unwrap(),
    ]);
    let out = run(&["inspect", "--index", idx.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    for needle in ["magic: PFIX", "version: 1", "agg: sum", "n: 200", "model_bytes:", "fallback_bytes:"] {
        assert!(text.contains(needle), "missing {needle:?} in {text}");
    }
    let json = run(&["inspect", "--index", idx.to_str().unwrap(), "--json"]);
    let jtext = stdout(&json);
    assert!(jtext.trim_start().starts_with('{') && jtext.trim_end().ends_with('}'));
    assert!(jtext.contains("\"error_histogram\""), "{jtext}");
}

#[test]
fn two_key_count_build_and_query() {
    let dir = tmp_dir();
    let mut content = String::new();
    for i in 0..400 {
        content.push_str(&format!("{},{},1\n", (i * 53 % 401) as f64, (i * 29 % 397) as f64));
    }
    let csv = write_csv(dir.path(), "pts.csv", &content);
    let idx = dir.path().join("idx2.pfix");
    let out = run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "count", "--dim", "2", "--deg", "2",
        "--delta", "8", "--out", idx.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let q = run(&[
        "query", "--index", idx.to_str().unwrap(), "--range", "50:350", "--range2", "20:300",
        "--mode", "abs", "--eps", "32", "--verify", csv.to_str().unwrap(),
    ]);
    assert!(q.status.success(), "{}", String::from_utf8_lossy(&q.stderr));
    let text = stdout(&q);
    let err: f64 = text
        .lines()
        .find(|l| l.starts_with("abs_error: "))
        .unwrap()["abs_error: ".len()..]
        .parse()
        .unwrap();
    assert!(err <= 32.0, "{text}");
    // Missing --range2 on a 2-key index is a usage error.
    let bad = run(&[
        "query", "--index", idx.to_str().unwrap(), "--range", "50:350", "--mode", "abs", "--eps",
        "32",
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn io_and_data_error_exit_codes() {
    let dir = tmp_dir();
    // Missing input file: I/O error.
    let out = run(&[
        "build", "--input", dir.path().join("nope.csv").to_str().unwrap(), "--agg", "sum",
        "--deg", "1", "--delta", "1", "--out", dir.path().join("x.pfix").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // Malformed CSV: data error.
    let bad = write_csv(dir.path(), "bad.csv", "1,abc\n");
    let out = run(&[
        "build", "--input", bad.to_str().unwrap(), "--agg", "sum", "--deg", "1", "--delta", "1",
        "--out", dir.path().join("x.pfix").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    // Corrupt index: data error.
    let csv = linear_csv(dir.path());
    let idx = dir.path().join("idx.pfix");
    run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "1", "--delta", "1",
        "--out", idx.to_str().unwrap(),
    ]);
    let mut bytes = std::fs::read(&idx).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    std::fs::write(&idx, &bytes).unwrap();
    let out = run(&["inspect", "--index", idx.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    // Unknown flag: usage error.
    let out = run(&["build", "--nonsense"]);
    assert_eq!(out.status.code(), Some(1));
    // Inverted range: usage error.
    let csv2 = linear_csv(dir.path());
    let idx2 = dir.path().join("idx2.pfix");
    run(&[
        "build", "--input", csv2.to_str().unwrap(), "--agg", "sum", "--deg", "1", "--delta", "1",
        "--out", idx2.to_str().unwrap(),
    ]);
    let out = run(&[
        "query", "--index", idx2.to_str().unwrap(), "--range", "4:1", "--mode", "abs", "--eps",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn min_and_max_queries_through_cli() {
    let dir = tmp_dir();
    let mut content = String::new();
    for i in 0..300 {
        content.push_str(&format!("{},{}\n", i as f64, ((i * 17) % 37) as f64 - 5.0));
    }
    let csv = write_csv(dir.path(), "mm.csv", &content);
    for agg in ["max", "min"] {
        let idx = dir.path().join(format!("{agg}.pfix"));
        let out = run(&[
            "build", "--input", csv.to_str().unwrap(), "--agg", agg, "--deg", "2", "--delta",
            "2", "--out", idx.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let q = run(&[
            "query", "--index", idx.to_str().unwrap(), "--range", "40:200", "--mode", "abs",
            "--eps", "2", "--verify", csv.to_str().unwrap(),
        ]);
        assert!(q.status.success(), "{}", String::from_utf8_lossy(&q.stderr));
        let text = stdout(&q);
        let err: f64 = text
            .lines()
            .find(|l| l.starts_with("abs_error: "))
            .unwrap()["abs_error: ".len()..]
            .parse()
            .unwrap();
        assert!(err <= 2.0 + 1e-9, "{agg}: {text}");
    }
}

#[test]
fn bench_honours_thread_override() {
    let dir = tmp_dir();
    let csv = wavy_csv(dir.path(), 400);
    let idx = dir.path().join("idx.pfix");
    run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "2", "--delta", "6",
        "--out", idx.to_str().unwrap(),
    ]);
    let report = dir.path().join("bench.csv");
    let out = bin()
        .env("POLYFIT_THREADS", "2")
        .args([
            "bench", "--index", idx.to_str().unwrap(), "--queries", "200", "--report",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 2); // header + abs row
}

/// The serialized format is pinned: rebuilding the same index from the same
/// input must reproduce the golden fixture byte for byte.
#[test]
fn golden_fixture_is_stable() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny.pfix");
    let dir = tmp_dir();
    let csv = write_csv(
        dir.path(),
        "tiny.csv",
        "1,10\n2,20\n3,15\n4,5\n5,25\n6,30\n7,5\n8,10\n",
    );
    let idx = dir.path().join("tiny.pfix");
    let out = run(&[
        "build", "--input", csv.to_str().unwrap(), "--agg", "sum", "--deg", "2", "--delta", "3",
        "--out", idx.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let built = std::fs::read(&idx).unwrap();
    let golden = std::fs::read(&fixture).expect("golden fixture present");
    assert_eq!(built, golden, "PFIX encoding drifted from the golden fixture");
}
