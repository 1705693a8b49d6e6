//! Independent verification: residual reports recomputed from scratch,
//! convergence studies over grid refinements, and the exact randomized law
//! suite for the Koszul-complex axioms.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::complex::Complex64;
use num::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::exterior::{ConjIndex, ExteriorIndex, HolomorphicMap, KoszulForm};
use crate::gleason::{
    gleason_decompose, DecompositionResult, GateCheck, GleasonConfig, GleasonError,
    HolomorphicInput,
};
use crate::grid::{fd_dbar, interior_max, l2_norm, GridError, GridGeometry};
use crate::symbolic::{crat_from_i64, PolyExpr};

/// Residuals at or below this multiple of max(1, sup|g|) count as sitting at
/// the round-off floor; convergence ratios computed from them are reported as
/// at-floor instead of asserted.
pub const AT_FLOOR_REL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, Serialize)]
pub struct GridEcho {
    pub n: usize,
    pub m: usize,
    pub centers: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    pub rho: f64,
    pub alpha: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub r_id: f64,
    pub r_hol: Vec<f64>,
    pub lift_identity: f64,
    pub split_residual: f64,
    pub tau_w: f64,
    pub dbar_w: f64,
    pub w_support: f64,
    pub descent: f64,
    pub solver: Vec<crate::gleason::LabeledSolve>,
    pub fd_floor_g: f64,
    pub fd_floor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Norms {
    pub g_sup: f64,
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
}

/// The JSON report: grid echo, recomputed residuals, norms, gate outcomes,
/// and (for convergence studies) order estimates.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub grid: GridEcho,
    pub residuals: Residuals,
    pub norms: Norms,
    pub gates: BTreeMap<String, GateCheck>,
    pub order_estimates: BTreeMap<String, OrderEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderEstimate {
    pub levels: Vec<usize>,
    pub values: Vec<f64>,
    pub ratios: Vec<RatioEntry>,
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioEntry {
    pub from_m: usize,
    pub to_m: usize,
    /// None means both levels sit at the round-off floor.
    pub ratio: Option<f64>,
    pub at_floor: bool,
}

impl ResidualReport {
    pub fn pass(&self) -> bool {
        self.gates.values().all(|g| g.pass)
    }

    /// All report numbers must be finite before serialization.
    pub fn assert_finite(&self) -> Result<(), String> {
        let check = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("non-finite report field {name}: {v}"))
            }
        };
        check("r_id", self.residuals.r_id)?;
        for (i, v) in self.residuals.r_hol.iter().enumerate() {
            check(&format!("r_hol[{i}]"), *v)?;
        }
        for (i, v) in self.norms.sup.iter().enumerate() {
            check(&format!("sup[{i}]"), *v)?;
        }
        for (i, v) in self.norms.l2.iter().enumerate() {
            check(&format!("l2[{i}]"), *v)?;
        }
        check("g_sup", self.norms.g_sup)?;
        Ok(())
    }
}

/// Recompute every residual and norm from the decomposition fields, without
/// trusting pipeline-internal bookkeeping, and gate them with the same rules
/// the pipeline used.
pub fn verify_decomposition(
    g: &HolomorphicInput,
    result: &DecompositionResult,
    geom: &Arc<GridGeometry>,
    config: &GleasonConfig,
) -> Result<ResidualReport, GridError> {
    let n = geom.n();
    let rho = geom.spec.shrink;
    assert!(
        result.g_field.geometry().spec == geom.spec,
        "spec mismatch between result and geometry"
    );

    // identity residual from scratch
    let mut residual = result.g_field.clone();
    {
        let vals = residual.values_mut();
        for idx in 0..geom.total {
            if !geom.mask[idx] {
                vals[idx] = Complex64::zero();
                continue;
            }
            let z = geom.point(idx);
            let mut s = Complex64::zero();
            for j in 0..n {
                s += (z[j] - g.alpha[j]) * result.g_components[j].values()[idx];
            }
            vals[idx] -= s;
        }
    }
    let r_id = interior_max(&residual, rho)?;

    let mut r_hol = Vec::with_capacity(n);
    for gj in &result.g_components {
        let mut worst = 0.0f64;
        for axis in 1..=n {
            worst = worst.max(interior_max(&fd_dbar(gj, axis), rho)?);
        }
        r_hol.push(worst);
    }
    let mut fd_floor_g = 0.0f64;
    for axis in 1..=n {
        fd_floor_g = fd_floor_g.max(interior_max(&fd_dbar(&result.g_field, axis), rho)?);
    }
    let solver_floor = result
        .report
        .descent
        .solves
        .iter()
        .filter(|s| s.level == 0)
        .map(|s| s.report.residual)
        .fold(0.0f64, f64::max);
    let fd_floor = fd_floor_g.max(solver_floor);

    let g_sup = interior_max(&result.g_field, rho)?;
    let sup: Vec<f64> = result
        .g_components
        .iter()
        .map(|gj| interior_max(gj, rho))
        .collect::<Result<_, _>>()?;
    let l2: Vec<f64> = result.g_components.iter().map(l2_norm).collect();

    let tol_id = config.tol.tol_id_rel * g_sup;
    let tol_hol = config.tol.tol_hol_rel * fd_floor.max(1e-12 * g_sup.max(1.0));
    let r_hol_max = r_hol.iter().copied().fold(0.0f64, f64::max);
    let mut gates = BTreeMap::new();
    gates.insert(
        "r_id".to_string(),
        GateCheck {
            value: r_id,
            tolerance: tol_id,
            pass: r_id <= tol_id,
        },
    );
    gates.insert(
        "r_hol".to_string(),
        GateCheck {
            value: r_hol_max,
            tolerance: tol_hol,
            pass: r_hol_max <= tol_hol,
        },
    );

    Ok(ResidualReport {
        grid: GridEcho {
            n,
            m: geom.m(),
            centers: geom.spec.centers.iter().map(|c| [c.re, c.im]).collect(),
            radii: geom.spec.radii.clone(),
            rho,
            alpha: g.alpha.iter().map(|c| [c.re, c.im]).collect(),
        },
        residuals: Residuals {
            r_id,
            r_hol,
            lift_identity: result.report.lift_identity,
            split_residual: result.report.split_residual,
            tau_w: result.report.tau_w,
            dbar_w: result.report.dbar_w,
            w_support: result.report.w_support,
            descent: result.report.descent.residual,
            solver: result.report.descent.solves.clone(),
            fd_floor_g,
            fd_floor,
        },
        norms: Norms { g_sup, sup, l2 },
        gates,
        order_estimates: BTreeMap::new(),
    })
}

// ---------------------------------------------------------------------------
// convergence study

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub r_id: f64,
    pub r_hol_max: f64,
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    pub g_sup: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub order_estimates: BTreeMap<String, OrderEstimate>,
    /// Gate: every adjacent R_id pair either improves by the required factor
    /// or both sit at the round-off floor.
    pub r_id_gate: GateCheck,
}

fn make_estimate(levels: &[usize], values: &[f64], floors: &[f64]) -> OrderEstimate {
    let mut ratios = Vec::new();
    let mut orders = Vec::new();
    for i in 0..values.len().saturating_sub(1) {
        let at_floor = values[i] <= floors[i] && values[i + 1] <= floors[i + 1];
        let ratio = if at_floor || values[i] == 0.0 {
            None
        } else {
            Some(values[i + 1] / values[i])
        };
        if let Some(r) = ratio {
            if r > 0.0 {
                orders.push(-r.log2());
            }
        }
        ratios.push(RatioEntry {
            from_m: levels[i],
            to_m: levels[i + 1],
            ratio,
            at_floor,
        });
    }
    OrderEstimate {
        levels: levels.to_vec(),
        values: values.to_vec(),
        ratios,
        observed_order: if orders.is_empty() {
            None
        } else {
            Some(orders.iter().sum::<f64>() / orders.len() as f64)
        },
    }
}

/// Run the pipeline over an ascending list of grid levels. Per-level
/// failures are recorded, not fatal; the R_id ratio gate requires each
/// refinement to at least halve the residual unless both ends are at floor.
pub fn convergence_study(
    g: &HolomorphicInput,
    spec_for_m: impl Fn(usize) -> crate::grid::PolydiscSpec,
    m_list: &[usize],
    config: &GleasonConfig,
) -> ConvergenceStudy {
    let mut rows = Vec::new();
    for &m in m_list {
        let row = match GridGeometry::new(spec_for_m(m))
            .map_err(GleasonError::from)
            .and_then(|geom| gleason_decompose(g, &geom, config))
        {
            Ok(result) => ConvergenceRow {
                m,
                r_id: result.report.r_id,
                r_hol_max: result.report.r_hol.iter().copied().fold(0.0, f64::max),
                sup: result.report.sup_norms.clone(),
                l2: result.report.l2_norms.clone(),
                g_sup: result.report.sup_g,
                error: None,
            },
            Err(e) => ConvergenceRow {
                m,
                r_id: f64::NAN,
                r_hol_max: f64::NAN,
                sup: Vec::new(),
                l2: Vec::new(),
                g_sup: f64::NAN,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let ok: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let levels: Vec<usize> = ok.iter().map(|r| r.m).collect();
    let floors: Vec<f64> = ok
        .iter()
        .map(|r| AT_FLOOR_REL * r.g_sup.max(1.0))
        .collect();
    let r_ids: Vec<f64> = ok.iter().map(|r| r.r_id).collect();
    let r_hols: Vec<f64> = ok.iter().map(|r| r.r_hol_max).collect();
    let mut order_estimates = BTreeMap::new();
    let id_est = make_estimate(&levels, &r_ids, &floors);
    let hol_est = make_estimate(&levels, &r_hols, &floors);

    // ratio gate over R_id
    let mut worst_ratio = 0.0f64;
    let mut pass = ok.len() == rows.len() && ok.len() >= 2;
    for entry in &id_est.ratios {
        match entry.ratio {
            None => {} // at floor
            Some(r) => {
                worst_ratio = worst_ratio.max(r);
                if r > 0.5 {
                    pass = false;
                }
            }
        }
    }
    order_estimates.insert("r_id".to_string(), id_est);
    order_estimates.insert("r_hol".to_string(), hol_est);
    ConvergenceStudy {
        rows,
        order_estimates,
        r_id_gate: GateCheck {
            value: worst_ratio,
            tolerance: 0.5,
            pass,
        },
    }
}

/// CSV rendering of a convergence table.
pub fn convergence_csv(study: &ConvergenceStudy) -> String {
    let mut out = String::from("M,r_id,r_hol_max,g_sup,sup_norms,l2_norms,ratio_r_id,status\n");
    let ratios: BTreeMap<usize, &RatioEntry> = study.order_estimates["r_id"]
        .ratios
        .iter()
        .map(|r| (r.to_m, r))
        .collect();
    for row in &study.rows {
        let ratio = match ratios.get(&row.m) {
            Some(r) if r.at_floor => "at-floor".to_string(),
            Some(r) => r
                .ratio
                .map(|v| format!("{v}"))
                .unwrap_or_else(|| "at-floor".to_string()),
            None => String::new(),
        };
        let status = row.error.clone().unwrap_or_else(|| "ok".to_string());
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.m,
            row.r_id,
            row.r_hol_max,
            row.g_sup,
            join_f64(&row.sup),
            join_f64(&row.l2),
            ratio,
            status
        ));
    }
    out
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

// ---------------------------------------------------------------------------
// exact law suite

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub trial: u64,
    pub law: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LawSuiteReport {
    pub seed: u64,
    pub trials: u64,
    pub checks: u64,
    pub violations: Vec<Violation>,
}

impl LawSuiteReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

fn random_poly(rng: &mut ChaCha12Rng, n: usize, max_terms: usize, holomorphic: bool) -> PolyExpr {
    let terms = rng.random_range(0..=max_terms);
    let mut p = PolyExpr::zero(n);
    for _ in 0..terms {
        let mut exps = vec![0u32; 2 * n];
        let mut budget = 4u32;
        let slots = if holomorphic { n } else { 2 * n };
        for _ in 0..rng.random_range(0..=3) {
            if budget == 0 {
                break;
            }
            let slot = rng.random_range(0..slots);
            let e = rng.random_range(1..=budget.min(2));
            exps[slot] += e;
            budget -= e;
        }
        let re = rng.random_range(-3i64..=3);
        let im = rng.random_range(-3i64..=3);
        p = p
            .add(&PolyExpr::from_terms(n, [(exps, crat_from_i64(re, im))]))
            .unwrap();
    }
    p
}

fn random_form(
    rng: &mut ChaCha12Rng,
    n: usize,
    r: usize,
    s: usize,
) -> KoszulForm<PolyExpr> {
    let combos = |len: usize| -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        fn rec(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, start: u8, len: usize, n: u8) {
            if cur.len() == len {
                out.push(cur.clone());
                return;
            }
            for j in start..=n {
                cur.push(j);
                rec(out, cur, j + 1, len, n);
                cur.pop();
            }
        }
        rec(&mut out, &mut Vec::new(), 1, len, n as u8);
        out
    };
    let mut form = KoszulForm::zero(n, r, s);
    for e in combos(r) {
        for k in combos(s) {
            if rng.random_bool(0.7) {
                form.accumulate(
                    ExteriorIndex::new(e.clone(), n).unwrap(),
                    ConjIndex::new(k.clone(), n).unwrap(),
                    random_poly(rng, n, 2, false),
                );
            }
        }
    }
    form
}

fn forms_equal(a: &KoszulForm<PolyExpr>, b: &KoszulForm<PolyExpr>) -> bool {
    a.sub(b).map(|d| d.is_zero()).unwrap_or(false)
}

fn describe(
    n: usize,
    f: &HolomorphicMap<PolyExpr>,
    a: &KoszulForm<PolyExpr>,
    b: Option<&KoszulForm<PolyExpr>>,
) -> String {
    let fs: Vec<String> = (1..=n).map(|j| f.component(j).to_string()).collect();
    match b {
        Some(b) => format!("F = ({}); A = {}; B = {}", fs.join(", "), a, b),
        None => format!("F = ({}); A = {}", fs.join(", "), a),
    }
}

/// Randomized exact checking of the four structure laws on the symbolic
/// backend: τ² = 0, ∂̄² = 0, τ∂̄ = ∂̄τ, and the anti-derivation sign law.
/// Zero tolerance: any nonzero coefficient anywhere is a violation.
/// `inject_sign_error` deliberately flips the anti-derivation sign to prove
/// the harness can fail.
pub fn run_law_suite(seed: u64, trials: u64, inject_sign_error: bool) -> LawSuiteReport {
    let mut violations = Vec::new();
    let mut checks = 0u64;
    for trial in 0..trials {
        // seed-indexed sub-generator per trial
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9E3779B97F4A7C15) ^ trial);
        let n = rng.random_range(1..=3usize);
        let r = rng.random_range(0..=2.min(n));
        let s = rng.random_range(0..=2.min(n));
        let a = random_form(&mut rng, n, r, s);
        let rb = rng.random_range(0..=(n - r).min(1));
        let sb = rng.random_range(0..=(n - s).min(1));
        let b = random_form(&mut rng, n, rb, sb);
        // F holomorphic so that τ_F commutes with ∂̄
        let f = HolomorphicMap::new(
            (0..n)
                .map(|_| random_poly(&mut rng, n, 2, true))
                .collect::<Vec<_>>(),
        );

        // law 1: τ∘τ = 0
        checks += 1;
        let t2 = a.tau(&f).unwrap().tau(&f).unwrap();
        if !t2.is_zero() {
            violations.push(Violation {
                trial,
                law: "tau_tau_zero".into(),
                detail: describe(n, &f, &a, None),
            });
        }
        // law 2: ∂̄∘∂̄ = 0
        checks += 1;
        if !a.dbar_form().dbar_form().is_zero() {
            violations.push(Violation {
                trial,
                law: "dbar_dbar_zero".into(),
                detail: describe(n, &f, &a, None),
            });
        }
        // law 3: τ∂̄ = ∂̄τ
        checks += 1;
        let lhs = a.dbar_form().tau(&f).unwrap();
        let rhs = a.tau(&f).unwrap().dbar_form();
        if !forms_equal(&lhs, &rhs) {
            violations.push(Violation {
                trial,
                law: "tau_dbar_commute".into(),
                detail: describe(n, &f, &a, None),
            });
        }
        // law 4: τ(A∧B) = τA∧B + (−1)^|A| A∧τB
        checks += 1;
        let lhs = a.wedge(&b).unwrap().tau(&f).unwrap();
        let t1 = a.tau(&f).unwrap().wedge(&b).unwrap();
        let t2 = a.wedge(&b.tau(&f).unwrap()).unwrap();
        let mut sign_flip = a.exterior_degree() % 2 == 1;
        if inject_sign_error {
            sign_flip = !sign_flip;
        }
        let rhs = if sign_flip {
            t1.sub(&t2).unwrap()
        } else {
            t1.add(&t2).unwrap()
        };
        if !forms_equal(&lhs, &rhs) {
            violations.push(Violation {
                trial,
                law: "anti_derivation".into(),
                detail: describe(n, &f, &a, Some(&b)),
            });
        }
    }
    LawSuiteReport {
        seed,
        trials,
        checks,
        violations,
    }
}
