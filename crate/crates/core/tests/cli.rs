use std::process::{Command, Output};

fn vsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_labels_and_bound() {
    let o = vsm(&["run", "--dim", "2", "--epsilon", "0.01"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("labels_used      9"), "{text}");
    assert!(text.contains("label_bound 70"), "{text}");
}

#[test]
fn unknown_algorithm_is_a_usage_error() {
    let o = vsm(&["compare", "--algs", "vsm,perceptron"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("perceptron"));
}

#[test]
fn grids_are_rejected_outside_sweep() {
    let o = vsm(&["run", "--dim", "2-4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_csv_is_reproducible_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, jobs) in [(&a, "1"), (&b, "3")] {
        let o = vsm(&[
            "compare", "--dim", "4", "--budget", "40", "--seeds", "3", "--master-seed", "9",
            "--jobs", jobs, "--out", path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let rows = halfspace_vsm::harness::trace::read_trace(bytes.as_slice()).unwrap();
    for alg in ["vsm", "uncertainty", "random"] {
        let runs: std::collections::BTreeSet<u64> =
            rows.iter().filter(|r| r.algorithm == alg).map(|r| r.run_id).collect();
        assert_eq!(runs.len(), 3, "{alg}");
    }
    let last = |id: u64| rows.iter().filter(|r| r.run_id == id).map(|r| r.query_index).max();
    assert_eq!(last(0), Some(40));
    assert_eq!(last(2), Some(40));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "dim = 3\nepsilon = 0.01\nseeds = 2\n").unwrap();
    let o = vsm(&["run", "--config", cfg.to_str().unwrap(), "--seeds", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("dim   3"), "{text}");

    std::fs::write(&cfg, "dim = 3\ncolour = \"red\"\n").unwrap();
    let o = vsm(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_passes_on_small_suite() {
    let o = vsm(&["validate", "--dim", "2-4", "--seeds", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("validated 15 runs"), "{text}");
    assert!(text.trim_end().ends_with("PASS"));
}

#[test]
fn sweep_summarizes_every_cell() {
    let o = vsm(&["sweep", "--dim", "2,3", "--epsilon", "0.01,0.001", "--seeds", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    assert!(!text.contains(" NO"));
}
