//! End-to-end tests of the binary: exit codes, artifacts, reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_primemagic"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn construct_writes_record_and_square() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["construct", "--q0", "5"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("construct.csv")).unwrap();
    assert!(csv.starts_with("schema_version,"));
    assert!(csv.contains("1,71,5,101,89,59,29,17,113,47"));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("construct.json")).unwrap())
            .unwrap();
    assert_eq!(record["q0"], 5);
    assert_eq!(record["t"], 12);
    assert_eq!(record["u"], 42);
    assert_eq!(record["magic_constant"], 177);
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("construct_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["subcommand"], "construct");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn small_obstruction_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    for q0 in ["2", "3"] {
        let out = run_in(dir.path(), &["construct", "--q0", q0]);
        assert_eq!(code(&out), 3, "q0={q0}");
    }
    // composite q0 is an invalid configuration, not an obstruction
    let out = run_in(dir.path(), &["construct", "--q0", "9"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn exhausted_budget_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["construct", "--q0", "5", "--budget", "10"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn scan_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["scan", "--max", "100"]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 1 + 23); // header + primes 5..97
    assert!(rows[1].starts_with("1,5,true,12,42,177"));
}

#[test]
fn verify_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["verify", "--q0", "5", "--square", "71,5,101,89,59,29,17,113,47"],
    );
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    // a failing square still produces a report and exit 0
    let out = run_in(dir.path(), &["verify", "--q0", "5", "--square", "2,7,6,9,5,1,4,3,8"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    let out = run_in(dir.path(), &["verify", "--q0", "5", "--square", "1,2,3"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn local_table_contains_exact_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["local", "--q0", "5", "--max", "20"]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("local.csv")).unwrap();
    let row7: Vec<&str> = csv.lines().find(|l| l.starts_with("1,7,")).unwrap().split(',').collect();
    // p, core_count, g1 = 3/22
    assert_eq!(&row7[1..6], &["7", "22", "3", "22", "3"]);
}

#[test]
fn mass_and_diagcheck_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["mass", "--q0", "5", "--X", "64"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("mass.csv")).unwrap();
    assert!(csv.lines().count() == 2);

    let out = run_in(dir.path(), &["diagcheck", "--q0", "5", "--X", "64"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("directions ok"));
}

#[test]
fn restricted_domain_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["restricted", "--q0", "5", "--X", "64", "--d", "11"],
    );
    assert_eq!(code(&out), 0);
    let out = run_in(
        dir.path(),
        &["restricted", "--q0", "5", "--X", "64", "--d", "12"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn bdh_and_region_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["bdh", "--X", "10000", "--max", "50"]);
    assert_eq!(code(&out), 0);
    let out = run_in(dir.path(), &["region", "--X", "20"]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("region.csv")).unwrap();
    assert!(csv.lines().count() > 100); // ~N^2/2 dilation points
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["discrepancy", "--q0", "5", "--X", "96", "--delta", "0.5"];
    assert_eq!(code(&run_in(a.path(), &args)), 0);
    assert_eq!(code(&run_in(b.path(), &args)), 0);
    let csv_a = fs::read(a.path().join("discrepancy.csv")).unwrap();
    let csv_b = fs::read(b.path().join("discrepancy.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "CSV bodies must be byte-identical across reruns");
    let json_a = fs::read(a.path().join("discrepancy.json")).unwrap();
    let json_b = fs::read(b.path().join("discrepancy.json")).unwrap();
    assert_eq!(json_a, json_b);
}

#[test]
fn out_prefix_and_threads_flags() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("custom/run1");
    fs::create_dir_all(dir.path().join("custom")).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "construct",
            "--q0",
            "7",
            "--threads",
            "1",
            "--out",
            prefix.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(prefix.with_extension("csv").exists());
    assert!(Path::new(&format!("{}_manifest.json", prefix.display())).exists());
}
