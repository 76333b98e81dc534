use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qpolar::btpm::Btpm;
use qpolar::polarize::{polarization_report, ConstructionMode};
use qpolar::quantum::binary_entropy;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_qpolar");

fn spec(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn run(args: &[&str], input: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--input")
        .arg(input)
        .output()
        .expect("binary runs")
}

fn json_out(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

const BITFLIP_09: &str = r#"{"kind":"bitflip","p":0.9}"#;
const IDENTITY: &str = r#"{"kind":"bitflip","p":1.0}"#;

#[test]
fn classify_bitflip() {
    let dir = TempDir::new().unwrap();
    let out = run(&["classify"], &spec(&dir, "bf.json", BITFLIP_09));
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    assert_eq!(v["symmetry_class"]["tag"], "FullySymmetric");
    let p = v["canonical"]["probs"].as_array().unwrap();
    assert!((p[0].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!((p[1].as_f64().unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(v["canonical"]["permutation"], serde_json::json!([1, 0]));
}

#[test]
fn classify_amplitude_damping_btpm() {
    let dir = TempDir::new().unwrap();
    let path = spec(
        &dir,
        "ad.json",
        r#"{"kind":"btpm","matrix":[[1,0],[0.3,0.7]]}"#,
    );
    let v = json_out(&run(&["classify"], &path));
    assert_eq!(v["symmetry_class"]["tag"], "Asymmetric");
    assert!(v["canonical"].is_null());
}

#[test]
fn classify_non_commuting_kraus_reports_no_btpm() {
    // {|+⟩⟨0|, |0⟩⟨1|}: images |+⟩⟨+| and |0⟩⟨0| do not commute.
    let s = 0.5f64.sqrt();
    let json = format!(
        r#"{{"kind":"kraus","operators":[[[[{s},0],[0,0]],[[{s},0],[0,0]]],[[[0,0],[1,0]],[[0,0],[0,0]]]]}}"#
    );
    let dir = TempDir::new().unwrap();
    let out = run(&["classify"], &spec(&dir, "nc.json", &json));
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    assert_eq!(v["has_btpm"], false);
    assert!((v["max_commutator"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn classify_csv_lists_entries() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["classify", "--format", "csv"],
        &spec(&dir, "bf.json", BITFLIP_09),
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("input,output,probability\n"));
    assert_eq!(csv_rows(&text).len(), 4);
}

#[test]
fn coherent_single_points() {
    let dir = TempDir::new().unwrap();
    let v = json_out(&run(
        &["coherent", "--q", "0.5"],
        &spec(&dir, "bf.json", BITFLIP_09),
    ));
    assert!(
        (v["coherent_information"].as_f64().unwrap() - (1.0 - binary_entropy(0.1))).abs() < 1e-9
    );

    let v = json_out(&run(
        &["coherent", "--q", "0.3"],
        &spec(&dir, "id.json", IDENTITY),
    ));
    assert!((v["coherent_information"].as_f64().unwrap() - binary_entropy(0.3)).abs() < 1e-10);

    let half = spec(&dir, "half.json", r#"{"kind":"bitflip","p":0.5}"#);
    let v = json_out(&run(&["coherent", "--q", "0.5"], &half));
    assert!(v["coherent_information"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn coherent_sweep_csv() {
    let dir = TempDir::new().unwrap();
    let path = spec(&dir, "bf.json", BITFLIP_09);
    let out = run(&["coherent", "--sweep", "101", "--format", "csv"], &path);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 101);
    let v = json_out(&run(&["coherent", "--sweep", "101"], &path));
    assert_eq!(v["q_star"].as_f64().unwrap(), 0.5);
}

#[test]
fn polarize_n2_sums_to_twice_capacity() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["polarize", "--N", "2", "--format", "csv"],
        &spec(&dir, "bf.json", BITFLIP_09),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    let sum: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((sum - 1.062_008_812_821_437_6).abs() < 1e-9);
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["construction_mode"]["kind"], "exact");
}

#[test]
fn polarize_n16_passes_sum_check() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["polarize", "--N", "16", "--deltas", "0.01,0.1"],
        &spec(&dir, "bf.json", BITFLIP_09),
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json_out(&out);
    let gap = v["sum_check"].as_f64().unwrap() - v["sum_expected"].as_f64().unwrap();
    assert!(gap.abs() < 1e-8);
    assert_eq!(v["good_fraction"].as_array().unwrap().len(), 2);
}

#[test]
fn polarize_identity_is_perfect() {
    let dir = TempDir::new().unwrap();
    let v = json_out(&run(
        &["polarize", "--N", "8"],
        &spec(&dir, "id.json", IDENTITY),
    ));
    for p in v["per_index"].as_array().unwrap() {
        assert!((p["value"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn polarize_refuses_asymmetric_base() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["polarize", "--N", "4"],
        &spec(
            &dir,
            "ad.json",
            r#"{"kind":"btpm","matrix":[[1,0],[0.3,0.7]]}"#,
        ),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Asymmetric"));
}

#[test]
fn polarize_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    let input = spec(
        &dir,
        "bf.json",
        r#"{"kind":"btpm","matrix":[[0.9,0.1],[0.1,0.9]]}"#,
    );
    let csv_path = dir.path().join("out.csv");
    let json_path = dir.path().join("out.json");
    for (fmt, path) in [("csv", &csv_path), ("json", &json_path)] {
        let out = Command::new(BIN)
            .args(["polarize", "--N", "8", "--format", fmt, "--output"])
            .arg(path)
            .arg("--input")
            .arg(&input)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let base = Btpm::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
    let expected = polarization_report(&base, 8, &[0.01, 0.1], ConstructionMode::Exact).unwrap();

    let rows = csv_rows(&std::fs::read_to_string(&csv_path).unwrap());
    let from_json: Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    for (k, p) in expected.per_index.iter().enumerate() {
        assert_eq!(rows[k][0].parse::<usize>().unwrap(), p.i);
        assert_eq!(
            rows[k][1].parse::<f64>().unwrap().to_bits(),
            p.value.to_bits()
        );
        let j = from_json["per_index"][k]["value"].as_f64().unwrap();
        assert_eq!(j.to_bits(), p.value.to_bits());
    }
    assert_eq!(
        from_json["sum_check"].as_f64().unwrap().to_bits(),
        expected.sum_check.to_bits()
    );
}

#[test]
fn verify_bitflip_all_suites_pass() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &["verify", "--N", "2", "--suite", "all"],
        &spec(&dir, "bf.json", BITFLIP_09),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v = json_out(&out);
    assert_eq!(v["suites"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_perturbed_btpm_fails_symmetry() {
    let dir = TempDir::new().unwrap();
    let path = spec(
        &dir,
        "p.json",
        r#"{"kind":"btpm","matrix":[[0.9,0.1],[0.15,0.85]]}"#,
    );
    let out = run(&["verify", "--N", "2", "--suite", "theorem5"], &path);
    assert_eq!(out.status.code(), Some(1));
    let v = json_out(&out);
    assert!(v["suites"][0]["max_violation"].as_f64().unwrap() >= 0.01);
}

#[test]
fn verify_identity_n4_oracle_agreement() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &[
            "verify", "--N", "4", "--suite", "theorem7", "--format", "csv",
        ],
        &spec(&dir, "id.json", IDENTITY),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0][0], "theorem7");
    assert_eq!(rows[0][1], "true");
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = spec(
        &dir,
        "bad.json",
        "{\"kind\": \"bitflip\",\n \"p\": \"high\"}",
    );
    let out = run(&["classify"], &bad);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = spec(&dir, "m.json", r#"{"kind":"btpm"}"#);
    let out = run(&["classify"], &missing);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matrix"));

    let bf = spec(&dir, "bf.json", BITFLIP_09);
    assert_eq!(run(&["polarize", "--N", "3"], &bf).status.code(), Some(2));
    assert_eq!(run(&["verify", "--N", "8"], &bf).status.code(), Some(2));
    assert_eq!(run(&["coherent"], &bf).status.code(), Some(2));
    assert_eq!(
        run(&["coherent", "--q", "0.5", "--sweep", "11"], &bf)
            .status
            .code(),
        Some(2)
    );
    let nofile = Command::new(BIN)
        .args(["classify", "--input", "/nonexistent/spec.json"])
        .output()
        .unwrap();
    assert_eq!(nofile.status.code(), Some(2));
}

#[test]
fn phaseflip_uses_x_basis() {
    let dir = TempDir::new().unwrap();
    let path = spec(&dir, "pf.json", r#"{"kind":"phaseflip","p":0.9}"#);
    let v = json_out(&run(&["classify"], &path));
    assert_eq!(v["symmetry_class"]["tag"], "FullySymmetric");
    let out = run(&["verify", "--N", "2"], &path);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}
