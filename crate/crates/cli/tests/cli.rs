//! CLI behavior: exit codes, parse diagnostics, config layering, error paths.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use koszul::grid::{sample_poly, write_csv, GridGeometry, PolydiscSpec};
use koszul::symbolic::parse_poly;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_koszul")
}

fn koszul(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn unit_geom(n: usize, m: usize) -> Arc<GridGeometry> {
    GridGeometry::new(PolydiscSpec::unit(n, m)).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let (code, _, _) = koszul(&["decompose"]);
    assert_eq!(code, 2, "missing input selector");
    let (code, _, err) = koszul(&["decompose", "--fn", "nope", "--M", "16"]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown registry function"));
    let (code, _, _) = koszul(&["decompose", "--fn", "z1", "--M", "15"]);
    assert_eq!(code, 2, "odd M");
    let (code, _, _) = koszul(&["nonsense"]);
    assert_eq!(code, 2, "unknown subcommand (clap)");
    let (code, _, err) = koszul(&["decompose", "--poly-file", "/nosuch/file.poly"]);
    assert_eq!(code, 2);
    assert!(err.contains("file"));
}

#[test]
fn malformed_poly_file_names_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.poly");
    std::fs::write(&path, "z1 +\nz9^2").unwrap();
    let (code, _, err) = koszul(&["decompose", "--poly-file", path.to_str().unwrap(), "--M", "16"]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "stderr: {err}");
    assert!(err.contains("column"), "stderr: {err}");
}

#[test]
fn decompose_writes_fields_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let prefix = dir.path().join("fields_").to_str().unwrap().to_string();
    let (code, _, _) = koszul(&[
        "decompose",
        "--fn",
        "z1",
        "--n",
        "2",
        "--M",
        "16",
        "--out",
        report.to_str().unwrap(),
        "--fields-out",
        &prefix,
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&report).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["grid", "residuals", "norms", "gates", "order_estimates"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert!(json["residuals"]["r_id"].as_f64().unwrap() <= 1e-8);
    for name in ["g", "g1", "g2"] {
        assert!(
            Path::new(&format!("{prefix}{name}.csv")).exists(),
            "missing field dump {name}"
        );
    }
}

#[test]
fn config_file_layering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "fn = z1\nn = 2\nM = 16\nrho = 0.9\n").unwrap();
    let report = dir.path().join("r.json");
    // config alone works
    let (code, _, _) = koszul(&[
        "decompose",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["grid"]["m"].as_u64(), Some(16));
    // flags win over config
    let (code, _, _) = koszul(&[
        "decompose",
        "--config",
        cfg.to_str().unwrap(),
        "--M",
        "24",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["grid"]["m"].as_u64(), Some(24));
    // unknown config keys are usage errors
    std::fs::write(&cfg, "banana = 3\n").unwrap();
    let (code, _, err) = koszul(&["decompose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown key"));
}

#[test]
fn laws_vacuous_and_injected_failure() {
    let (code, out, _) = koszul(&["laws", "--trials", "0"]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["checks"].as_u64(), Some(0));

    let (code, out, err) = koszul(&["laws", "--trials", "50", "--seed", "1", "--inject-sign-error"]);
    assert_eq!(code, 1);
    assert!(err.contains("violation"));
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    let v = json["violations"].as_array().unwrap();
    assert!(!v.is_empty());
    // the serialized counterexample names the map and the form
    assert!(v[0]["detail"].as_str().unwrap().contains("F = ("));
}

#[test]
fn dbar_closedness_gate_exits_1() {
    // β = z̄2 dz̄1 + 0 dz̄2 is not ∂̄-closed
    let dir = tempfile::tempdir().unwrap();
    let geom = unit_geom(2, 16);
    let b1 = sample_poly(&geom, &parse_poly("zb2", 2).unwrap()).unwrap();
    let b2 = sample_poly(&geom, &parse_poly("0", 2).unwrap()).unwrap();
    let p1 = dir.path().join("b1.csv");
    let p2 = dir.path().join("b2.csv");
    for (p, f) in [(&p1, &b1), (&p2, &b2)] {
        let mut buf = Vec::new();
        write_csv(f, &mut buf).unwrap();
        std::fs::write(p, buf).unwrap();
    }
    let spec = format!("{},{}", p1.display(), p2.display());
    let (code, out, err) = koszul(&["dbar", "--beta-csv", &spec, "--n", "2", "--M", "16"]);
    assert_eq!(code, 1, "stderr: {err}");
    assert!(err.contains("closedness"), "stderr: {err}");
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(json["error"].as_str().unwrap().contains("closedness"));
}

#[test]
fn dbar_beta_csv_closed_input_solves() {
    // the same closed β as the potential path, fed through CSV fields
    let dir = tempfile::tempdir().unwrap();
    let geom = unit_geom(2, 16);
    let b1 = sample_poly(&geom, &parse_poly("zb2", 2).unwrap()).unwrap();
    let b2 = sample_poly(&geom, &parse_poly("zb1", 2).unwrap()).unwrap();
    let p1 = dir.path().join("b1.csv");
    let p2 = dir.path().join("b2.csv");
    for (p, f) in [(&p1, &b1), (&p2, &b2)] {
        let mut buf = Vec::new();
        write_csv(f, &mut buf).unwrap();
        std::fs::write(p, buf).unwrap();
    }
    let spec = format!("{},{}", p1.display(), p2.display());
    let (code, out, err) = koszul(&[
        "dbar", "--beta-csv", &spec, "--n", "2", "--M", "16", "--tol", "8e-2",
    ]);
    assert_eq!(code, 0, "stderr: {err}");
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(json["gates"]["residual"]["pass"].as_bool().unwrap());
}

#[test]
fn dbar_zero_beta() {
    let dir = tempfile::tempdir().unwrap();
    let pot = dir.path().join("pot.poly");
    std::fs::write(&pot, "z1 z2\n").unwrap(); // holomorphic potential: β = 0
    let (code, out, _) = koszul(&[
        "dbar",
        "--poly-file",
        pot.to_str().unwrap(),
        "--n",
        "2",
        "--M",
        "16",
    ]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(json["residuals"]["solver"]["residual"].as_f64(), Some(0.0));
    assert_eq!(json["residuals"]["solver"]["passes"].as_u64(), Some(0));
}

#[test]
fn converge_rejects_bad_level_lists() {
    let (code, _, _) = koszul(&["converge", "--fn", "z1", "--M", "16"]);
    assert_eq!(code, 2);
    let (code, _, _) = koszul(&["converge", "--fn", "z1", "--M", "32,16"]);
    assert_eq!(code, 2);
}

#[test]
fn converge_csv_has_at_floor_markers() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("table.csv");
    let (code, _, _) = koszul(&[
        "converge",
        "--fn",
        "z1",
        "--n",
        "2",
        "--M",
        "16,32",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.contains("at-floor"), "table:\n{table}");
}

#[test]
fn decompose_nonvanishing_input_fails_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let poly = dir.path().join("g.poly");
    std::fs::write(&poly, "1 + z1\n").unwrap();
    let report = dir.path().join("r.json");
    let (code, _, err) = koszul(&[
        "decompose",
        "--poly-file",
        poly.to_str().unwrap(),
        "--n",
        "2",
        "--M",
        "16",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("vanishing"), "stderr: {err}");
    // report still written, carrying the failure
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(json["error"].as_str().unwrap().contains("vanishing"));
}
