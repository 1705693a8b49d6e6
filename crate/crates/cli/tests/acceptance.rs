//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines for passing criteria too.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num::complex::Complex64;

use koszul::dbar::{cauchy_transform_direct, cauchy_transform_fft, DiscQuadrature};
use koszul::exterior::{ConjIndex, ExteriorIndex, HolomorphicMap, KoszulForm};
use koszul::gleason::{gleason_decompose, DecompositionResult, GleasonConfig};
use koszul::grid::{interior_max, sample_fn, sample_poly, GridGeometry, PolydiscSpec};
use koszul::registry::builtin;
use koszul::symbolic::{parse_poly, PolyExpr};
use koszul::verify::verify_decomposition;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_koszul")
}

// criteria carry wall-clock budgets, so they run one at a time
static SERIAL: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

struct CmdResult {
    status: i32,
    report: Option<serde_json::Value>,
    report_bytes: Vec<u8>,
}

fn run(dir: &Path, name: &str, args: &[&str], threads: Option<&str>) -> CmdResult {
    let report_path = dir.join(format!("{name}.json"));
    let mut cmd = Command::new(bin());
    cmd.args(args).arg("--out").arg(&report_path);
    if let Some(t) = threads {
        cmd.env("KOSZUL_THREADS", t);
    }
    let output = cmd.output().expect("spawn koszul");
    let status = output.status.code().unwrap_or(-1);
    let report_bytes = std::fs::read(&report_path).unwrap_or_default();
    let report = serde_json::from_slice(&report_bytes).ok();
    if report.is_none() {
        eprintln!(
            "command {name} produced no report; stderr: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    CmdResult {
        status,
        report,
        report_bytes,
    }
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}

fn unit_geom(n: usize, m: usize) -> Arc<GridGeometry> {
    GridGeometry::new(PolydiscSpec::unit(n, m)).unwrap()
}

#[test]
fn criterion_1_exact_koszul_laws() {
    let _guard = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let r = run(dir.path(), "laws", &["laws", "--trials", "200", "--seed", "1"], None);
    let elapsed = start.elapsed();
    let report = r.report.expect("laws report");
    let violations = report["violations"].as_array().unwrap().len();
    let pass = r.status == 0 && violations == 0 && elapsed <= Duration::from_secs(60);
    verdict(
        "criterion 1 (exact Koszul laws)",
        pass,
        &format!("exit {}, {} violations, {:.1?}", r.status, violations, elapsed),
    );
}

#[test]
fn criterion_2_cauchy_pompeiu() {
    let _guard = serial();
    let start = Instant::now();
    let mut errs = Vec::new();
    for m in [64usize, 128] {
        let geom = unit_geom(1, m);
        let quad = DiscQuadrature::new(&geom.axes[0]);
        let ones = sample_fn(&geom, &|_| Complex64::new(1.0, 0.0)).unwrap();
        let u = cauchy_transform_fft(&ones, 1, &quad);
        let zbar = sample_fn(&geom, &|z| z[0].conj()).unwrap();
        errs.push(interior_max(&u.sub_field(&zbar), 0.9).unwrap());
    }
    let ratio = errs[1] / errs[0];

    // FFT path vs direct summation at M = 64
    let geom = unit_geom(1, 64);
    let quad = DiscQuadrature::new(&geom.axes[0]);
    let f = sample_fn(&geom, &|z| (z[0] * Complex64::new(0.3, 1.1)).exp() + z[0].conj()).unwrap();
    let fft = cauchy_transform_fft(&f, 1, &quad);
    let direct = cauchy_transform_direct(&f, &quad);
    let scale = interior_max(&f, 1.0).unwrap();
    let mut agree = 0.0f64;
    for idx in 0..geom.total {
        if geom.mask[idx] {
            agree = agree.max((fft.values()[idx] - direct.values()[idx]).norm());
        }
    }
    let elapsed = start.elapsed();
    let pass = errs[1] <= 1e-2
        && (0.15..=0.45).contains(&ratio)
        && agree <= 1e-9 * scale
        && elapsed <= Duration::from_secs(30);
    verdict(
        "criterion 2 (Cauchy–Pompeiu correctness)",
        pass,
        &format!(
            "err(128) = {:.3e}, ratio 64→128 = {:.3}, fft-direct = {:.2e} (rel {:.2e}), {:.1?}",
            errs[1],
            ratio,
            agree,
            agree / scale,
            elapsed
        ),
    );
}

#[test]
fn criterion_3_polydisc_dbar_solver() {
    let _guard = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    // (0,1): β = ∂̄(z̄1 z̄2)
    let pot01 = dir.path().join("pot01.poly");
    std::fs::write(&pot01, "zb1 zb2\n").unwrap();
    // (0,2): β = ∂̄(z̄1 dz̄2) = dz̄1∧dz̄2
    let pot02 = dir.path().join("pot02.poly");
    std::fs::write(&pot02, "0\nzb1\n").unwrap();

    let mut residuals = std::collections::BTreeMap::new();
    let mut pass = true;
    let mut detail = String::new();
    for (case, pot) in [("01", &pot01), ("02", &pot02)] {
        for m in ["24", "48"] {
            let name = format!("dbar{case}_{m}");
            let r = run(
                dir.path(),
                &name,
                &[
                    "dbar",
                    "--poly-file",
                    pot.to_str().unwrap(),
                    "--n",
                    "2",
                    "--M",
                    m,
                ],
                None,
            );
            pass &= r.status == 0;
            let report = r.report.expect("dbar report");
            let resid = report["residuals"]["solver"]["residual"].as_f64().unwrap();
            let scale = report["norms"]["beta_scale"].as_f64().unwrap();
            pass &= resid <= 5e-2 * scale;
            residuals.insert(name.clone(), resid);
            detail.push_str(&format!("{name}: {resid:.3e} (scale {scale:.2}); "));
        }
        let improvement = residuals[&format!("dbar{case}_24")] / residuals[&format!("dbar{case}_48")];
        pass &= improvement >= 2.0;
        detail.push_str(&format!("improvement({case}) = {improvement:.1}; "));
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(300);
    detail.push_str(&format!("{elapsed:.1?}"));
    verdict("criterion 3 (polydisc dbar solver)", pass, &detail);
}

#[test]
fn criterion_4_symbolic_descent_witness() {
    let _guard = serial();
    // F = (z1,z2), W = e1⊗(−z2 dz̄1) + e2⊗(z1 dz̄1), Y = e1∧e2⊗z̄1:
    // τ_F ∂̄Y = W exactly on the symbolic backend
    let n = 2;
    let f = HolomorphicMap::new(vec![PolyExpr::var(n, 1), PolyExpr::var(n, 2)]);
    let mut w = KoszulForm::zero(n, 1, 1);
    w.accumulate(
        ExteriorIndex::single(1),
        ConjIndex::single(1),
        PolyExpr::var(n, 2).neg(),
    );
    w.accumulate(
        ExteriorIndex::single(2),
        ConjIndex::single(1),
        PolyExpr::var(n, 1),
    );
    let y = KoszulForm::from_component(
        n,
        ExteriorIndex::new(vec![1, 2], n).unwrap(),
        ConjIndex::empty(),
        PolyExpr::conj_var(n, 1),
    )
    .unwrap();
    let diff = y.dbar_form().tau(&f).unwrap().sub(&w).unwrap();
    verdict(
        "criterion 4 (symbolic descent witness)",
        diff.is_zero(),
        "τ_F ∂̄(e1∧e2 ⊗ z̄1) equals W with zero tolerance",
    );
}

fn check_decompose_report(report: &serde_json::Value) -> (bool, String) {
    let r_id = report["residuals"]["r_id"].as_f64().unwrap();
    let g_sup = report["norms"]["g_sup"].as_f64().unwrap();
    let fd_floor = report["residuals"]["fd_floor"].as_f64().unwrap();
    let r_hol = report["residuals"]["r_hol"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .fold(0.0f64, f64::max);
    let id_ok = r_id <= 5e-3 * g_sup;
    let hol_ok = r_hol <= 10.0 * fd_floor.max(1e-12 * g_sup.max(1.0));
    (
        id_ok && hol_ok,
        format!(
            "r_id = {:.2e} (≤ {:.2e}), r_hol = {:.2e} (≤ 10×floor = {:.2e})",
            r_id,
            5e-3 * g_sup,
            r_hol,
            10.0 * fd_floor
        ),
    )
}

#[test]
fn criterion_5_n2_gleason_pipeline() {
    let _guard = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for func in ["bilinear", "expsum"] {
        let r = run(
            dir.path(),
            &format!("dec_{func}"),
            &["decompose", "--fn", func, "--n", "2", "--M", "32"],
            None,
        );
        pass &= r.status == 0;
        let report = r.report.expect("decompose report");
        let (ok, d) = check_decompose_report(&report);
        pass &= ok;
        detail.push_str(&format!("{func}: {d}; "));

        let c = run(
            dir.path(),
            &format!("conv_{func}"),
            &["converge", "--fn", func, "--n", "2", "--M", "16,32"],
            None,
        );
        pass &= c.status == 0;
        let conv = c.report.expect("converge report");
        pass &= conv["gates"]["r_id_ratio"]["pass"].as_bool().unwrap();
        // sup and L² norms finite and within 20% across refinement
        let rows = conv["residuals"].as_array().unwrap();
        for key in ["sup", "l2"] {
            let lo: Vec<f64> = rows[0][key]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            let hi: Vec<f64> = rows[1][key]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            for (a, b) in lo.iter().zip(&hi) {
                pass &= a.is_finite() && b.is_finite();
                let drift = (b / a - 1.0).abs();
                pass &= drift <= 0.2;
                detail.push_str(&format!("{func}.{key} drift {:.1}%; ", 100.0 * drift));
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed <= Duration::from_secs(600);
    detail.push_str(&format!("{elapsed:.1?}"));
    verdict("criterion 5 (n=2 Gleason pipeline)", pass, &detail);
}

#[test]
fn criterion_6_n3_pipeline_executes() {
    let _guard = serial();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let r = run(
        dir.path(),
        "dec_n3",
        &[
            "decompose", "--fn", "expsum", "--n", "3", "--M", "10", "--rho", "0.8",
        ],
        None,
    );
    let report = r.report.expect("n=3 report");
    let solves = report["residuals"]["solver"].as_array().unwrap();
    let labels: Vec<&str> = solves
        .iter()
        .map(|s| s["label"].as_str().unwrap())
        .collect();
    let count02 = labels.iter().filter(|l| l.contains("(0,2)")).count();
    let count01 = labels.iter().filter(|l| l.contains("(0,1)")).count();
    let r_id = report["residuals"]["r_id"].as_f64().unwrap();
    let g_sup = report["norms"]["g_sup"].as_f64().unwrap();
    let elapsed = start.elapsed();
    let pass = r.status == 0
        && count02 == 1
        && count01 == 3
        && r_id <= 5e-2 * g_sup
        && elapsed <= Duration::from_secs(900);
    verdict(
        "criterion 6 (n=3 pipeline executes)",
        pass,
        &format!(
            "exit {}, one (0,2) + three (0,1) solves = ({count02},{count01}), r_id = {:.2e} ≤ {:.2e}, {:.1?}",
            r.status,
            r_id,
            5e-2 * g_sup,
            elapsed
        ),
    );
}

#[test]
fn criterion_7_gauge_robustness() {
    let _guard = serial();
    let g = builtin("bilinear", 2).unwrap();
    let geom = unit_geom(2, 16);
    let config = GleasonConfig::default();
    let result = gleason_decompose(&g, &geom, &config).expect("pipeline");
    assert!(result.report.pass);
    let h = sample_poly(&geom, &parse_poly("1 + z1 - 2 z2", 2).unwrap()).unwrap();
    let z1 = sample_poly(&geom, &parse_poly("z1", 2).unwrap()).unwrap();
    let z2 = sample_poly(&geom, &parse_poly("z2", 2).unwrap()).unwrap();
    let perturbed = vec![
        result.g_components[0].add_field(&z2.mul_field(&h)),
        result.g_components[1].sub_field(&z1.mul_field(&h)),
    ];
    let pert = DecompositionResult::from_fields(perturbed, result.g_field.clone());
    let base = verify_decomposition(&g, &result, &geom, &config).unwrap();
    let gauged = verify_decomposition(&g, &pert, &geom, &config).unwrap();
    let delta = (base.residuals.r_id - gauged.residuals.r_id).abs();
    verdict(
        "criterion 7 (gauge non-uniqueness robustness)",
        delta <= 1e-10,
        &format!(
            "R_id = {:.3e} vs gauged {:.3e}, |Δ| = {:.2e} ≤ 1e-10",
            base.residuals.r_id, gauged.residuals.r_id, delta
        ),
    );
}

#[test]
fn criterion_8_determinism_across_thread_counts() {
    let _guard = serial();
    let dir = tempfile::tempdir().unwrap();
    let pot01 = dir.path().join("pot01.poly");
    std::fs::write(&pot01, "zb1 zb2\n").unwrap();
    let pot = pot01.to_str().unwrap();
    let cases: Vec<(&str, Vec<&str>)> = vec![
        ("laws", vec!["laws", "--trials", "200", "--seed", "1"]),
        ("dbar24", vec!["dbar", "--poly-file", pot, "--n", "2", "--M", "24"]),
        (
            "dec_bilinear",
            vec!["decompose", "--fn", "bilinear", "--n", "2", "--M", "32"],
        ),
        (
            "dec_expsum",
            vec!["decompose", "--fn", "expsum", "--n", "2", "--M", "32"],
        ),
        (
            "conv_expsum",
            vec!["converge", "--fn", "expsum", "--n", "2", "--M", "16,32"],
        ),
        (
            "dec_n3",
            vec![
                "decompose", "--fn", "expsum", "--n", "3", "--M", "10", "--rho", "0.8",
            ],
        ),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (name, args) in &cases {
        let d1 = tempfile::tempdir().unwrap();
        let d4 = tempfile::tempdir().unwrap();
        let r1 = run(d1.path(), name, args, Some("1"));
        let r4 = run(d4.path(), name, args, Some("4"));
        let same = r1.report_bytes == r4.report_bytes && !r1.report_bytes.is_empty();
        pass &= same && r1.status == r4.status;
        detail.push_str(&format!(
            "{name}: {} ({} bytes); ",
            if same { "identical" } else { "DIFFERS" },
            r1.report_bytes.len()
        ));
    }
    verdict(
        "criterion 8 (bitwise determinism, KOSZUL_THREADS 1 vs 4)",
        pass,
        &detail,
    );
}
