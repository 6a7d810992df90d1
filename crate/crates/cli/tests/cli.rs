use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eom")).args(args).output().expect("spawn eom")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len()..].split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn unknown_problem_exits_with_usage_code() {
    let o = eom(&["solve", "--problem", "no-such-problem"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown problem"));
}

#[test]
fn bad_degree_range_is_a_usage_error() {
    let o = eom(&["sweep", "--problem", "lane-emden-p0", "--m", "8..2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_reports_small_residual_for_p0() {
    let o = eom(&["solve", "--problem", "lane-emden-p0", "--m", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(field(&text, "residual norm1") < 1e-12, "{text}");
    assert!(field(&text, "error norm1") < 1e-12, "{text}");
    assert!(field(&text, "y(M)").abs() < 1e-12, "{text}");
}

#[test]
fn solve_json_output_parses() {
    let o = eom(&["solve", "--problem", "lane-emden-p1", "--m", "6", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["m"], 6);
    assert_eq!(v["mode"], "eom");
    assert!(v["error_norm1"].as_f64().unwrap() < 1e-5);
    assert_eq!(v["c"]["entries"].as_array().unwrap().len(), 7);
}

#[test]
fn nonconvergence_exits_with_code_three() {
    let o = eom(&["solve", "--problem", "lane-emden-p5", "--m", "3", "--tol", "1e-40"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("best iterate"));
}

fn sweep_into(dir: &Path) -> Output {
    eom(&[
        "sweep",
        "--problem",
        "lane-emden-sin",
        "--m",
        "2..5",
        "--no-timing",
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn sweep_writes_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = sweep_into(dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for mode in ["eom", "oom"] {
        for suffix in ["sweep.csv", "sweep.json", "norms.dat", "pointwise.dat"] {
            let path = dir.path().join(format!("lane-emden-sin_{mode}_{suffix}"));
            assert!(path.exists(), "missing {}", path.display());
        }
    }
    let csv = fs::read_to_string(dir.path().join("lane-emden-sin_eom_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lane-emden-sin_oom_sweep.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 4);
}

#[test]
fn sweep_csv_is_reproducible_without_timing() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(sweep_into(a.path()).status.success());
    assert!(sweep_into(b.path()).status.success());
    for name in ["lane-emden-sin_eom_sweep.csv", "lane-emden-sin_oom_sweep.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn gram_matrix_is_printed_exactly() {
    let o = eom(&["matrices", "--kind", "Q", "--big", "4", "--small", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].split_whitespace().collect::<Vec<_>>(), ["1/7", "1/21", "1/105"]);
    assert_eq!(rows[2].split_whitespace().collect::<Vec<_>>(), ["2/35", "3/35", "2/35"]);
}

#[test]
fn problem_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("linear.json");
    fs::write(
        &path,
        r#"{"name":"custom-linear","f_kind":"poly_minus2_2x2plus3","g_kind":{"power_int":1},
            "a":1.0,"b":0.0,"M":1.0,"N":8}"#,
    )
    .unwrap();
    let o = eom(&["solve", "--problem-file", path.to_str().unwrap(), "--m", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("custom-linear"));
    assert!(field(&text, "error norm1") < 1e-6, "{text}");
}

#[test]
fn malformed_problem_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"name":"x","f_kind":"constant_one"}"#).unwrap();
    let o = eom(&["solve", "--problem-file", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reference_table_starts_at_initial_value() {
    let o = eom(&["reference", "--problem", "lane-emden-p1", "--points", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let first: Vec<f64> = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(first, [0.0, 1.0, 0.0]);
}

#[test]
fn problems_lists_registry() {
    let text = stdout(&eom(&["problems"]));
    for name in ["lane-emden-p0", "lane-emden-exp", "emden-fowler-linear"] {
        assert!(text.contains(name));
    }
}
