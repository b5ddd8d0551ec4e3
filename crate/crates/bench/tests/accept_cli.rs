//! End-to-end acceptance tests of the `qpuvirt-bench` binary.

use std::process::{Command, Output};

use qpuvirt::ResultBuffer;
use qpuvirt_bench::{CSV_HEADER, OUT_DIR_ENV};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpuvirt-bench"))
        .args(args)
        .env_remove(OUT_DIR_ENV)
        .output()
        .unwrap()
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn missing_qubits_is_a_usage_error() {
    let out = bench(&["mcvqe-grad"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--qubits"));
}

#[test]
fn mcvqe_rows_carry_closed_form_circuit_count() {
    let out = bench(&[
        "mcvqe-grad",
        "--qubits",
        "4",
        "--n-virtual-qpus",
        "1,2",
        "--reps",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[0] == "mcvqe" && r[4] == "640"));
    assert_eq!(
        rows.iter().map(|r| r[3].as_str()).collect::<Vec<_>>(),
        ["1", "1", "2", "2"]
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("speedup="));
}

#[test]
fn ddcl_rows_carry_closed_form_circuit_count() {
    for (n, expected) in [("4", "96"), ("6", "144")] {
        let out = bench(&[
            "ddcl-grad",
            "--qubits",
            n,
            "--layers",
            "2",
            "--reps",
            "1",
            "--shots",
            "64",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let rows = csv_rows(&out);
        assert_eq!(rows[0][2], "2");
        assert_eq!(rows[0][4], expected);
    }
}

#[test]
fn ddcl_rejects_odd_register() {
    let out = bench(&["ddcl-grad", "--qubits", "21"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("even"));
}

#[test]
fn verify_counts_exits_zero() {
    let out = bench(&["verify-counts"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("13984") && text.contains("3120"));
    assert!(!text.contains("MISMATCH"));
}

#[test]
fn dump_buffer_and_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("buffer.txt");
    let out = Command::new(env!("CARGO_BIN_EXE_qpuvirt-bench"))
        .args([
            "mcvqe-grad",
            "--qubits",
            "3",
            "--reps",
            "1",
            "--mode",
            "counts",
            "--shots",
            "100",
        ])
        .arg("--dump-buffer")
        .arg(&dump)
        .env(OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let buffer = ResultBuffer::deserialize(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(buffer.len(), 2 * 14 * 11);
    assert!(buffer.children().iter().all(|c| c.shots == 100));
    let csv = std::fs::read_to_string(dir.path().join("mcvqe.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("# mcvqe"));
}

#[test]
fn print_gradient_lists_every_component() {
    let out = bench(&[
        "mcvqe-grad",
        "--qubits",
        "2",
        "--reps",
        "1",
        "--print-gradient",
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let values: Vec<f64> = stderr.lines().filter_map(|l| l.parse().ok()).collect();
    assert_eq!(values.len(), 6);
}
