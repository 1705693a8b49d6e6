//! The Gleason decomposition pipeline on polydiscs (n ≤ 3): write a bounded
//! holomorphic g with g(α) = 0 as Σ (z_j − α_j) g_j with holomorphic bounded
//! g_j.
//!
//! Construction: split g = Σ (z_j − α_j) λ_j near α by the ray integral of
//! ∂g, glue the λ_j against the global singular quotient g·conj(z_j−α_j)/|z−α|²
//! through a smooth cutoff χ to get bounded lifts L_j with Σ (z_j−α_j) L_j = g
//! exactly, assemble W = Σ e_j ⊗ ∂̄L_j, descend it through the Koszul complex
//! (Y with τ_F ∂̄Y = W), and correct: the components of L − τ_F(Y) are the
//! holomorphic g_j. For n = 1 the quotient has a removable singularity and no
//! ∂̄ solve is needed.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::complex::Complex64;
use num::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::dbar::{solve_dbar_polydisc, DbarError, DbarProblem, SolveReport};
use crate::exterior::{
    ConjIndex, ExteriorError, ExteriorIndex, HolomorphicMap, KoszulForm,
};
use crate::grid::{
    fd_dbar, form_interior_max, interior_max, l2_norm, sample_fn, sample_poly, GridError,
    GridField, GridGeometry,
};
use crate::quadrature::{GAUSS_LEGENDRE_16, GAUSS_LEGENDRE_8};
use crate::symbolic::{rat_from_f64, CRat, PolyExpr};

pub type EvalFn = Arc<dyn Fn(&[Complex64]) -> Complex64 + Send + Sync>;

/// Holomorphic input: either an exact polynomial or a closure valid on a
/// neighborhood of the closed polydisc, with a declared vanishing point.
#[derive(Clone)]
pub enum Evaluator {
    Poly(PolyExpr),
    Fn(EvalFn),
}

#[derive(Clone)]
pub struct HolomorphicInput {
    pub eval: Evaluator,
    pub alpha: Vec<Complex64>,
    pub vanish_tol: f64,
}

impl HolomorphicInput {
    pub fn new(eval: Evaluator, alpha: Vec<Complex64>) -> Self {
        HolomorphicInput {
            eval,
            alpha,
            vanish_tol: 1e-10,
        }
    }

    pub fn value(&self, z: &[Complex64]) -> Complex64 {
        match &self.eval {
            Evaluator::Poly(p) => p.eval(z),
            Evaluator::Fn(f) => f(z),
        }
    }
}

/// Smooth cutoff description; radii are relative to the polydisc radii and
/// measure the scaled distance ρ(z) = (Σ_j |z_j−α_j|²/R_j²)^(1/2).
#[derive(Debug, Clone, Serialize)]
pub struct CutoffSpec {
    pub r_in: f64,
    pub r_out: f64,
    pub profile_exponent: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        CutoffSpec {
            r_in: 0.2,
            r_out: 0.4,
            profile_exponent: 1.0,
        }
    }
}

/// Gate constants and tolerance rules. Relative gates are measured against
/// the scale of the field they guard; resolved absolute tolerances land in
/// the report.
#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub vanish: f64,
    /// R_id gate as a multiple of sup|g| (default 5e-3).
    pub tol_id_rel: f64,
    /// R_hol gate as a multiple of the measured FD floor (default 10).
    pub tol_hol_rel: f64,
    pub lift_identity_rel: f64,
    pub tau_w_rel: f64,
    pub dbar_w_rel: f64,
    pub support_rel: f64,
    pub descent_rel: f64,
    pub closedness_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            vanish: 1e-10,
            tol_id_rel: 5e-3,
            tol_hol_rel: 10.0,
            lift_identity_rel: 1e-8,
            tau_w_rel: 0.25,
            dbar_w_rel: 0.25,
            support_rel: 0.25,
            descent_rel: 0.5,
            // top-degree dbar(X∧W) junk reaches ~1.8x scale on coarse grids
            // (unresolved cutoff derivatives amplified near the core); the
            // structural prune absorbs it and the descent-residual gate is
            // the binding check, so internal solves only reject blowups
            closedness_rel: 4.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GleasonConfig {
    pub cutoff: CutoffSpec,
    pub tol: Tolerances,
}

#[derive(Debug, Error)]
pub enum GleasonError {
    #[error("vanishing check failed: |g(alpha)| = {measured:.3e} > {tolerance:.3e}")]
    Vanishing { measured: f64, tolerance: f64 },
    #[error("taylor split: polynomial input must be holomorphic (no conjugate variables)")]
    NotHolomorphic,
    #[error("taylor split: quadrature non-convergence, GL16 vs GL8 disagree by {0:.3e}")]
    QuadratureNonConvergence(f64),
    #[error("taylor split: residual {measured:.3e} exceeds {tolerance:.3e} on the r_out ball")]
    TaylorSplitResidual { measured: f64, tolerance: f64 },
    #[error("cutoff: {0}")]
    CutoffInvalid(String),
    #[error("build_lifts: identity residual {measured:.3e} exceeds {tolerance:.3e}")]
    LiftIdentity { measured: f64, tolerance: f64 },
    #[error("build_lifts: singular quotient evaluated inside the chi=1 core")]
    QuotientGuard,
    #[error("build_X: denominator {0:.3e} below threshold outside the excluded core")]
    DivisionNearZeroLocus(f64),
    #[error("{stage}: measured {measured:.3e} exceeds gate {gate:.3e} (resolution failure)")]
    ResolutionFailure {
        stage: String,
        measured: f64,
        gate: f64,
    },
    #[error("pipeline supports n in 1..=3, got {0}")]
    UnsupportedDimension(usize),
    #[error("dbar solve at stage {stage}: {source}")]
    Solve {
        stage: String,
        #[source]
        source: DbarError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
}

// ---------------------------------------------------------------------------
// taylor split

#[derive(Debug)]
pub struct TaylorSplit {
    pub lambdas: Vec<GridField>,
    pub lambda_polys: Option<Vec<PolyExpr>>,
    /// GL16 vs GL8 disagreement on a node subsample (0 for exact inputs).
    pub quad_disagreement: f64,
    /// Max |Σ (z_j−α_j)λ_j − g| over the r_out ball.
    pub split_residual: f64,
    /// Max |∂̄λ| over the r_out ball (finite-difference level).
    pub lambda_dbar: f64,
}

fn scaled_rho(z: &[Complex64], alpha: &[Complex64], radii: &[f64]) -> f64 {
    z.iter()
        .zip(alpha)
        .zip(radii)
        .map(|((zj, aj), rj)| {
            let d = (zj - aj).norm() / rj;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Max |f| over masked nodes with scaled distance to α at most `r`.
fn ball_max(f: &GridField, alpha: &[Complex64], r: f64) -> f64 {
    let geom = f.geometry();
    let mut best = 0.0f64;
    for (idx, v) in f.values().iter().enumerate() {
        if !geom.mask[idx] {
            continue;
        }
        let z = geom.point(idx);
        if scaled_rho(&z, alpha, &geom.spec.radii) <= r {
            best = best.max(v.norm());
        }
    }
    best
}

fn ball_max_form(form: &KoszulForm<GridField>, alpha: &[Complex64], r: f64) -> f64 {
    let mut best = 0.0f64;
    for (_, _, c) in form.iter() {
        best = best.max(ball_max(c, alpha, r));
    }
    best
}

/// Exact ray-integral split for a polynomial: λ_j(z) = ∫₀¹ ∂_j g(α+t(z−α)) dt.
/// Shift to w = z−α, differentiate, weight each term by 1/(total degree + 1),
/// shift back.
fn poly_ray_integral(g: &PolyExpr, alpha: &[Complex64], j: usize) -> PolyExpr {
    let n = g.n();
    let shifted = poly_shift(g, alpha, true);
    let dg = shifted.dz(j);
    let mut integrated = PolyExpr::zero(n);
    let mut terms: Vec<(Vec<u32>, CRat)> = Vec::new();
    for (exps, c) in dg.terms() {
        let deg: u32 = exps.iter().sum();
        let denom = CRat::new(
            num::BigRational::from_integer((deg as i64 + 1).into()),
            num::BigRational::zero(),
        );
        terms.push((exps.clone(), c.clone() / denom));
    }
    for (exps, c) in terms {
        integrated = integrated
            .add(&PolyExpr::from_terms(n, [(exps, c)]))
            .unwrap();
    }
    poly_shift(&integrated, alpha, false)
}

/// Exact substitution z ↦ z ∓ α (forward shifts to coordinates centered at α).
fn poly_shift(p: &PolyExpr, alpha: &[Complex64], forward: bool) -> PolyExpr {
    let n = p.n();
    let mut out = PolyExpr::zero(n);
    for (exps, c) in p.terms() {
        let mut term = PolyExpr::constant(n, c.clone());
        for j in 0..n {
            let aj = CRat::new(rat_from_f64(alpha[j].re), rat_from_f64(alpha[j].im));
            let aj = if forward { aj } else { -aj };
            let base = PolyExpr::var(n, j + 1)
                .add(&PolyExpr::constant(n, aj))
                .unwrap();
            for _ in 0..exps[j] {
                term = term.mul(&base);
            }
            // holomorphic inputs only; conjugate slots are rejected upstream
            debug_assert_eq!(exps[n + j], 0);
        }
        out = out.add(&term).unwrap();
    }
    out
}

/// 4th-order finite-difference ∂/∂z_j of a holomorphic evaluator.
fn eval_dz(
    f: &dyn Fn(&[Complex64]) -> Complex64,
    z: &[Complex64],
    j: usize,
    step: f64,
) -> Complex64 {
    let mut p = z.to_vec();
    let mut at = |offset: f64| {
        p[j].re = z[j].re + offset;
        f(&p)
    };
    (-at(2.0 * step) + 8.0 * at(step) - 8.0 * at(-step) + at(-2.0 * step)) / (12.0 * step)
}

pub fn taylor_split(
    g: &HolomorphicInput,
    geom: &Arc<GridGeometry>,
    cutoff: &CutoffSpec,
    g_field: &GridField,
) -> Result<TaylorSplit, GleasonError> {
    let n = geom.n();
    let alpha = &g.alpha;
    let g_alpha = g.value(alpha).norm();
    if g_alpha > g.vanish_tol {
        return Err(GleasonError::Vanishing {
            measured: g_alpha,
            tolerance: g.vanish_tol,
        });
    }
    let sup_g = interior_max(g_field, 1.0).unwrap_or(0.0);

    let (lambdas, lambda_polys, quad_disagreement) = match &g.eval {
        Evaluator::Poly(p) => {
            if !p.is_holomorphic() {
                return Err(GleasonError::NotHolomorphic);
            }
            let polys: Vec<PolyExpr> = (1..=n).map(|j| poly_ray_integral(p, alpha, j)).collect();
            let fields = polys
                .iter()
                .map(|q| sample_poly(geom, q))
                .collect::<Result<Vec<_>, _>>()?;
            (fields, Some(polys), 0.0)
        }
        Evaluator::Fn(f) => {
            let lambda_field = |j: usize, rule: &[(f64, f64)]| {
                let f = f.clone();
                let alpha = alpha.to_vec();
                let step = 1e-3 * geom.spec.radii[j - 1];
                let rule = rule.to_vec();
                move |z: &[Complex64]| {
                    let mut acc = Complex64::zero();
                    let mut w = vec![Complex64::zero(); z.len()];
                    for &(t, wt) in &rule {
                        for (k, slot) in w.iter_mut().enumerate() {
                            *slot = alpha[k] + t * (z[k] - alpha[k]);
                        }
                        acc += wt * eval_dz(&*f, &w, j - 1, step);
                    }
                    acc
                }
            };
            let fields: Vec<GridField> = (1..=n)
                .map(|j| sample_fn(geom, &lambda_field(j, &GAUSS_LEGENDRE_16)))
                .collect::<Result<Vec<_>, _>>()?;
            // consecutive-rule agreement on a deterministic node subsample
            let mut disagreement = 0.0f64;
            for j in 1..=n {
                let coarse = lambda_field(j, &GAUSS_LEGENDRE_8);
                let mut count = 0usize;
                for idx in (0..geom.total).step_by(37) {
                    if !geom.mask[idx] {
                        continue;
                    }
                    let z = geom.point(idx);
                    let fine = fields[j - 1].values()[idx];
                    disagreement = disagreement.max((coarse(&z) - fine).norm());
                    count += 1;
                    if count >= 200 {
                        break;
                    }
                }
            }
            let gate = 1e-8 * sup_g.max(1.0);
            if disagreement > gate {
                return Err(GleasonError::QuadratureNonConvergence(disagreement));
            }
            (fields, None, disagreement)
        }
    };

    // split identity on the r_out ball
    let mut residual_field = g_field.clone();
    {
        let vals = residual_field.values_mut();
        for (idx, v) in vals.iter_mut().enumerate() {
            if !geom.mask[idx] {
                *v = Complex64::zero();
                continue;
            }
            let z = geom.point(idx);
            let mut s = Complex64::zero();
            for j in 0..n {
                s += (z[j] - alpha[j]) * lambdas[j].values()[idx];
            }
            *v -= s;
        }
    }
    let split_residual = ball_max(&residual_field, alpha, cutoff.r_out);
    let split_gate = (1e-10 * sup_g.max(1.0)).max(10.0 * quad_disagreement);
    if split_residual > split_gate {
        return Err(GleasonError::TaylorSplitResidual {
            measured: split_residual,
            tolerance: split_gate,
        });
    }

    let mut lambda_dbar = 0.0f64;
    for lam in &lambdas {
        for axis in 1..=n {
            lambda_dbar = lambda_dbar.max(ball_max(&fd_dbar(lam, axis), alpha, cutoff.r_out));
        }
    }

    Ok(TaylorSplit {
        lambdas,
        lambda_polys,
        quad_disagreement,
        split_residual,
        lambda_dbar,
    })
}

// ---------------------------------------------------------------------------
// cutoff

/// exp-based smooth step: 0 for t ≤ 0, 1 for t ≥ 1, a/(a+b) in between.
fn smooth_step(t: f64, k: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t.powf(k)).exp();
        let b = (-1.0 / (1.0 - t).powf(k)).exp();
        a / (a + b)
    }
}

pub fn cutoff_profile(rho: f64, cutoff: &CutoffSpec) -> f64 {
    smooth_step(
        (cutoff.r_out - rho) / (cutoff.r_out - cutoff.r_in),
        cutoff.profile_exponent,
    )
}

pub fn validate_cutoff(
    cutoff: &CutoffSpec,
    geom: &GridGeometry,
    alpha: &[Complex64],
) -> Result<(), GleasonError> {
    if !(cutoff.r_in > 0.0 && cutoff.r_in < cutoff.r_out) {
        return Err(GleasonError::CutoffInvalid(format!(
            "need 0 < r_in < r_out, got ({}, {})",
            cutoff.r_in, cutoff.r_out
        )));
    }
    for j in 0..geom.n() {
        let off = (alpha[j] - geom.spec.centers[j]).norm() / geom.spec.radii[j];
        if off + cutoff.r_out >= 1.0 {
            return Err(GleasonError::CutoffInvalid(format!(
                "r_out ball around alpha leaves the polydisc on axis {} ({:.3} + {:.3} >= 1)",
                j + 1,
                off,
                cutoff.r_out
            )));
        }
    }
    Ok(())
}

/// Sample χ over the grid: ≡1 for ρ ≤ r_in, ≡0 for ρ ≥ r_out, smooth between.
pub fn build_cutoff(
    cutoff: &CutoffSpec,
    geom: &Arc<GridGeometry>,
    alpha: &[Complex64],
) -> Result<GridField, GleasonError> {
    validate_cutoff(cutoff, geom, alpha)?;
    let alpha = alpha.to_vec();
    let radii = geom.spec.radii.clone();
    let cut = cutoff.clone();
    Ok(sample_fn(geom, &move |z: &[Complex64]| {
        Complex64::new(cutoff_profile(scaled_rho(z, &alpha, &radii), &cut), 0.0)
    })?)
}

// ---------------------------------------------------------------------------
// lifts

pub struct LiftFields {
    pub fields: Vec<GridField>,
    pub identity_residual: f64,
}

/// L_j = (1−χ)·g·conj(z_j−α_j)/Σ|z_k−α_k|² + χ·λ_j. The quotient is only
/// evaluated where χ < 1, which the cutoff keeps away from α.
pub fn build_lifts(
    g_field: &GridField,
    split: &TaylorSplit,
    chi: &GridField,
    alpha: &[Complex64],
    tol: &Tolerances,
) -> Result<LiftFields, GleasonError> {
    let geom = g_field.geometry().clone();
    let n = geom.n();
    let mut fields: Vec<GridField> = (0..n).map(|_| GridField::zeros(&geom)).collect();
    for idx in 0..geom.total {
        if !geom.in_support(idx) {
            continue;
        }
        let z = geom.point(idx);
        let c = chi.values()[idx].re;
        let gv = g_field.values()[idx];
        let denom: f64 = z
            .iter()
            .zip(alpha)
            .map(|(zj, aj)| (zj - aj).norm_sqr())
            .sum();
        for (j, field) in fields.iter_mut().enumerate() {
            let lam = split.lambdas[j].values()[idx];
            let v = if c >= 1.0 {
                lam
            } else {
                if denom < 1e-14 {
                    return Err(GleasonError::QuotientGuard);
                }
                let quot = gv * (z[j] - alpha[j]).conj() / denom;
                (1.0 - c) * quot + c * lam
            };
            field.values_mut()[idx] = v;
        }
    }
    // Σ (z_j − α_j) L_j = g at every masked node, up to evaluator round-off
    let mut residual = g_field.clone();
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
                s += (z[j] - alpha[j]) * fields[j].values()[idx];
            }
            vals[idx] -= s;
        }
    }
    let identity_residual = interior_max(&residual, 1.0)?;
    let sup_g = interior_max(g_field, 1.0)?;
    let gate = tol.lift_identity_rel * sup_g.max(1.0);
    if identity_residual > gate {
        return Err(GleasonError::LiftIdentity {
            measured: identity_residual,
            tolerance: gate,
        });
    }
    Ok(LiftFields {
        fields,
        identity_residual,
    })
}

// ---------------------------------------------------------------------------
// W, X, descent

pub struct WForm {
    pub form: KoszulForm<GridField>,
    pub scale: f64,
    pub tau_residual: f64,
    pub dbar_residual: f64,
    pub support_residual: f64,
}

/// W = Σ_j e_j ⊗ ∂̄L_j, with its three descent hypotheses measured:
/// τ_F(W) ≈ 0, ∂̄W ≈ 0, and support away from the χ≡1 core.
pub fn assemble_w(
    lifts: &LiftFields,
    map: &HolomorphicMap<GridField>,
    alpha: &[Complex64],
    cutoff: &CutoffSpec,
    tol: &Tolerances,
) -> Result<WForm, GleasonError> {
    let geom = lifts.fields[0].geometry().clone();
    let n = geom.n();
    let rho = geom.spec.shrink;
    let mut form = KoszulForm::zero(n, 1, 1);
    for (j, lift) in lifts.fields.iter().enumerate() {
        for k in 1..=n {
            let d = fd_dbar(lift, k);
            form.accumulate(
                ExteriorIndex::single(j as u8 + 1),
                ConjIndex::single(k as u8),
                d,
            );
        }
    }
    let scale = form_interior_max(&form, rho)?;
    let floor = 1e-12 * scale.max(1.0);
    let tau_residual = form_interior_max(&form.tau(map)?, rho)?;
    let dbar_residual = form_interior_max(&form.dbar_form(), rho)?;
    let support_residual = ball_max_form(&form, alpha, cutoff.r_in * 0.5);
    for (name, measured, rel) in [
        ("assemble_W: tau_F(W)", tau_residual, tol.tau_w_rel),
        ("assemble_W: dbar(W)", dbar_residual, tol.dbar_w_rel),
        ("assemble_W: core support", support_residual, tol.support_rel),
    ] {
        let gate = rel * scale + floor;
        if measured > gate {
            return Err(GleasonError::ResolutionFailure {
                stage: name.into(),
                measured,
                gate,
            });
        }
    }
    Ok(WForm {
        form,
        scale,
        tau_residual,
        dbar_residual,
        support_residual,
    })
}

pub struct XForm {
    pub form: KoszulForm<GridField>,
    pub tau_deviation: f64,
}

/// X = Σ_j e_j ⊗ χ_supp·conj(f_j)/Σ|f_k|², where χ_supp ≡ 1 on the support
/// of W and ≡ 0 near the zero locus of F (χ_supp = 1 − cutoff(r_in/2, r_in)).
pub fn build_x(
    map: &HolomorphicMap<GridField>,
    geom: &Arc<GridGeometry>,
    alpha: &[Complex64],
    cutoff: &CutoffSpec,
) -> Result<XForm, GleasonError> {
    let n = geom.n();
    let inner = CutoffSpec {
        r_in: cutoff.r_in * 0.5,
        r_out: cutoff.r_in,
        profile_exponent: cutoff.profile_exponent,
    };
    let chi_core = build_cutoff(&inner, geom, alpha)?;
    let mut comps: Vec<GridField> = (0..n).map(|_| GridField::zeros(geom)).collect();
    for idx in 0..geom.total {
        if !geom.in_support(idx) {
            continue;
        }
        let supp = 1.0 - chi_core.values()[idx].re;
        if supp == 0.0 {
            continue;
        }
        let mut denom = 0.0f64;
        for j in 0..n {
            denom += map.component(j + 1).values()[idx].norm_sqr();
        }
        if denom < 1e-14 {
            return Err(GleasonError::DivisionNearZeroLocus(denom));
        }
        for (j, comp) in comps.iter_mut().enumerate() {
            comp.values_mut()[idx] =
                supp * map.component(j + 1).values()[idx].conj() / denom;
        }
    }
    let mut form = KoszulForm::zero(n, 1, 0);
    for (j, comp) in comps.into_iter().enumerate() {
        form.accumulate(ExteriorIndex::single(j as u8 + 1), ConjIndex::empty(), comp);
    }
    // τ_F(X) must be 1 wherever χ_supp ≡ 1
    let tau_x = form.tau(map)?;
    let mut tau_deviation = 0.0f64;
    if let Some(scalar) = tau_x.component(&ExteriorIndex::empty(), &ConjIndex::empty()) {
        for idx in 0..geom.total {
            if !geom.mask[idx] {
                continue;
            }
            if 1.0 - chi_core.values()[idx].re == 1.0 {
                tau_deviation =
                    tau_deviation.max((scalar.values()[idx] - Complex64::new(1.0, 0.0)).norm());
            }
        }
    }
    if tau_deviation > 1e-10 {
        return Err(GleasonError::ResolutionFailure {
            stage: "build_X: tau_F(X) on the support".into(),
            measured: tau_deviation,
            gate: 1e-10,
        });
    }
    Ok(XForm {
        form,
        tau_deviation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LabeledSolve {
    pub label: String,
    /// Descent level: 0 for the finishing solves whose output feeds the
    /// correction directly.
    pub level: usize,
    #[serde(flatten)]
    pub report: SolveReport,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct DescentReport {
    /// Measured ∂̄(X∧W) at each level that took the direct-solve branch.
    pub zero_gates: Vec<f64>,
    pub solves: Vec<LabeledSolve>,
    pub depth: usize,
    /// Recomputed max |τ_F ∂̄Y − W| on the ρ-interior.
    pub residual: f64,
}

fn exterior_label(e: &ExteriorIndex) -> String {
    let names: Vec<String> = e.indices().iter().map(|j| j.to_string()).collect();
    format!("e{}", names.join(""))
}

/// One descent level: Y₁ = X∧W; at top exterior degree (or when ∂̄Y₁ already
/// vanishes) solve ∂̄Y = Y₁ componentwise, otherwise recurse on ∂̄Y₁ to get
/// Y₂ with τ_F ∂̄Y₂ = ∂̄Y₁ and solve ∂̄Y = Y₁ − τ_F Y₂.
fn descent_level(
    w: &KoszulForm<GridField>,
    map: &HolomorphicMap<GridField>,
    x: &XForm,
    geom: &Arc<GridGeometry>,
    tol: &Tolerances,
    level: usize,
    report: &mut DescentReport,
) -> Result<KoszulForm<GridField>, GleasonError> {
    let n = geom.n();
    let rho = geom.spec.shrink;
    report.depth = report.depth.max(level + 1);
    if w.is_zero() {
        return Ok(KoszulForm::zero(
            n,
            (w.exterior_degree() + 1).min(n),
            w.conj_degree().saturating_sub(1),
        ));
    }
    let y1 = x.form.wedge(w)?;
    let d = y1.dbar_form();
    let d_max = form_interior_max(&d, rho)?;
    let y1_scale = form_interior_max(&y1, rho)?;
    let top = y1.exterior_degree() >= n;
    let target = if top || d_max <= 1e-10 * y1_scale.max(1.0) {
        report.zero_gates.push(d_max);
        drop(d);
        y1
    } else {
        let y2 = descent_level(&d, map, x, geom, tol, level + 1, report)?;
        drop(d);
        y1.sub(&y2.tau(map)?)?
    };
    // solve ∂̄Y = target separately for each exterior index
    let mut y = KoszulForm::zero(n, target.exterior_degree(), target.conj_degree() - 1);
    for e_idx in target.exterior_indices() {
        let mut beta = KoszulForm::zero(n, 0, target.conj_degree());
        for (e, k, c) in target.iter() {
            if *e == e_idx {
                beta.accumulate(ExteriorIndex::empty(), k.clone(), c.clone());
            }
        }
        let beta_scale = form_interior_max(&beta, rho)?;
        let label = format!(
            "level{} (0,{}) {}",
            level,
            target.conj_degree(),
            exterior_label(&e_idx)
        );
        let problem = DbarProblem {
            beta,
            geom: geom.clone(),
            closedness_tolerance: (tol.closedness_rel * beta_scale).max(1e-8),
        };
        let solution = solve_dbar_polydisc(&problem).map_err(|e| GleasonError::Solve {
            stage: label.clone(),
            source: e,
        })?;
        for (_, k, c) in solution.u.iter() {
            y.accumulate(e_idx.clone(), k.clone(), c.clone());
        }
        report.solves.push(LabeledSolve {
            label,
            level,
            report: solution.report,
        });
    }
    Ok(y)
}

/// Descend W through the complex: find Y of degree (r+1, s−1) with
/// τ_F ∂̄Y ≈ W, verified by recomputation.
pub fn koszul_descent(
    w: &WForm,
    map: &HolomorphicMap<GridField>,
    x: &XForm,
    geom: &Arc<GridGeometry>,
    tol: &Tolerances,
) -> Result<(KoszulForm<GridField>, DescentReport), GleasonError> {
    let rho = geom.spec.shrink;
    let mut report = DescentReport::default();
    let y = descent_level(&w.form, map, x, geom, tol, 0, &mut report)?;
    let achieved = y.dbar_form().tau(map)?;
    report.residual = form_interior_max(&achieved.sub(&w.form)?, rho)?;
    let gate = tol.descent_rel * w.scale + 1e-12 * w.scale.max(1.0);
    if report.residual > gate {
        return Err(GleasonError::ResolutionFailure {
            stage: "koszul_descent: tau_F dbar(Y) - W".into(),
            measured: report.residual,
            gate,
        });
    }
    Ok((y, report))
}

// ---------------------------------------------------------------------------
// the full pipeline

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub sup_g: f64,
    pub r_id: f64,
    pub r_hol: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub l2_norms: Vec<f64>,
    pub lift_identity: f64,
    pub split_residual: f64,
    pub quad_disagreement: f64,
    pub lambda_dbar: f64,
    pub w_scale: f64,
    pub tau_w: f64,
    pub dbar_w: f64,
    pub w_support: f64,
    pub tau_x_deviation: f64,
    pub descent: DescentReport,
    pub fd_floor_g: f64,
    /// max(fd_floor_g, worst recomputed solve residual): the measured FD floor.
    pub fd_floor: f64,
    pub tol_id: f64,
    pub tol_hol: f64,
    pub gates: BTreeMap<String, GateCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateCheck {
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub struct DecompositionResult {
    pub g_components: Vec<GridField>,
    pub g_field: GridField,
    pub report: DecompositionReport,
}

impl DecompositionReport {
    /// A blank report for externally supplied decompositions (e.g. exact
    /// witnesses handed straight to the verifier).
    pub fn empty(n: usize, m: usize, rho: f64) -> Self {
        DecompositionReport {
            n,
            m,
            rho,
            sup_g: 0.0,
            r_id: 0.0,
            r_hol: vec![0.0; n],
            sup_norms: vec![0.0; n],
            l2_norms: vec![0.0; n],
            lift_identity: 0.0,
            split_residual: 0.0,
            quad_disagreement: 0.0,
            lambda_dbar: 0.0,
            w_scale: 0.0,
            tau_w: 0.0,
            dbar_w: 0.0,
            w_support: 0.0,
            tau_x_deviation: 0.0,
            descent: DescentReport::default(),
            fd_floor_g: 0.0,
            fd_floor: 0.0,
            tol_id: 0.0,
            tol_hol: 0.0,
            gates: BTreeMap::new(),
            pass: false,
        }
    }
}

impl DecompositionResult {
    /// Wrap externally constructed component fields so they can be verified.
    pub fn from_fields(g_components: Vec<GridField>, g_field: GridField) -> Self {
        let geom = g_field.geometry().clone();
        let report =
            DecompositionReport::empty(geom.n(), geom.m(), geom.spec.shrink);
        DecompositionResult {
            g_components,
            g_field,
            report,
        }
    }
}

/// Decompose g = Σ (z_j − α_j) g_j on the polydisc described by `geom`.
pub fn gleason_decompose(
    g: &HolomorphicInput,
    geom: &Arc<GridGeometry>,
    config: &GleasonConfig,
) -> Result<DecompositionResult, GleasonError> {
    let n = geom.n();
    if n == 0 || n > 3 {
        return Err(GleasonError::UnsupportedDimension(n));
    }
    assert_eq!(g.alpha.len(), n, "alpha dimension");
    validate_cutoff(&config.cutoff, geom, &g.alpha)?;

    let g_field = match &g.eval {
        Evaluator::Poly(p) => sample_poly(geom, p)?,
        Evaluator::Fn(f) => sample_fn(geom, &**f)?,
    };
    let split = taylor_split(g, geom, &config.cutoff, &g_field)?;
    let chi = build_cutoff(&config.cutoff, geom, &g.alpha)?;
    let lifts = build_lifts(&g_field, &split, &chi, &g.alpha, &config.tol)?;

    let (g_components, w_data, descent_report) = if n == 1 {
        // removable singularity: the quotient g/(z−α) and λ₁ agree; blend them
        (vec![lifts.fields[0].clone()], None, DescentReport::default())
    } else {
        let alpha = g.alpha.clone();
        let f_fields: Vec<GridField> = (0..n)
            .map(|j| {
                let aj = alpha[j];
                sample_fn(geom, &move |z: &[Complex64]| z[j] - aj)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let map = HolomorphicMap::new(f_fields).with_zero_locus(alpha.clone());
        let w = assemble_w(&lifts, &map, &g.alpha, &config.cutoff, &config.tol)?;
        let x = build_x(&map, geom, &g.alpha, &config.cutoff)?;
        let (y, descent_report) = koszul_descent(&w, &map, &x, geom, &config.tol)?;
        let correction = y.tau(&map)?;
        let mut comps = Vec::with_capacity(n);
        for j in 0..n {
            let e_j = ExteriorIndex::single(j as u8 + 1);
            let gj = match correction.component(&e_j, &ConjIndex::empty()) {
                Some(c) => lifts.fields[j].sub_field(c),
                None => lifts.fields[j].clone(),
            };
            comps.push(gj);
        }
        (comps, Some((w, x)), descent_report)
    };

    let rho = geom.spec.shrink;
    let sup_g = interior_max(&g_field, rho)?;

    // identity residual, recomputed from the output fields
    let mut residual = g_field.clone();
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
                s += (z[j] - g.alpha[j]) * g_components[j].values()[idx];
            }
            vals[idx] -= s;
        }
    }
    let r_id = interior_max(&residual, rho)?;

    let mut r_hol = Vec::with_capacity(n);
    for gj in &g_components {
        let mut worst = 0.0f64;
        for axis in 1..=n {
            worst = worst.max(interior_max(&fd_dbar(gj, axis), rho)?);
        }
        r_hol.push(worst);
    }
    let mut fd_floor_g = 0.0f64;
    for axis in 1..=n {
        fd_floor_g = fd_floor_g.max(interior_max(&fd_dbar(&g_field, axis), rho)?);
    }
    // only the finishing solves (level 0) shape the output fields
    let solver_floor = descent_report
        .solves
        .iter()
        .filter(|s| s.level == 0)
        .map(|s| s.report.residual)
        .fold(0.0f64, f64::max);
    let fd_floor = fd_floor_g.max(solver_floor);

    let sup_norms: Vec<f64> = g_components
        .iter()
        .map(|gj| interior_max(gj, rho))
        .collect::<Result<_, _>>()?;
    let l2_norms: Vec<f64> = g_components.iter().map(l2_norm).collect();

    let tol_id = config.tol.tol_id_rel * sup_g;
    let tol_hol = config.tol.tol_hol_rel * fd_floor.max(1e-12 * sup_g.max(1.0));
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
    let pass = gates.values().all(|g| g.pass);

    let (w_scale, tau_w, dbar_w, w_support, tau_x_deviation) = match &w_data {
        Some((w, x)) => (
            w.scale,
            w.tau_residual,
            w.dbar_residual,
            w.support_residual,
            x.tau_deviation,
        ),
        None => (0.0, 0.0, 0.0, 0.0, 0.0),
    };

    let report = DecompositionReport {
        n,
        m: geom.m(),
        rho,
        sup_g,
        r_id,
        r_hol,
        sup_norms,
        l2_norms,
        lift_identity: lifts.identity_residual,
        split_residual: split.split_residual,
        quad_disagreement: split.quad_disagreement,
        lambda_dbar: split.lambda_dbar,
        w_scale,
        tau_w,
        dbar_w,
        w_support,
        tau_x_deviation,
        descent: descent_report,
        fd_floor_g,
        fd_floor,
        tol_id,
        tol_hol,
        gates,
        pass,
    };

    Ok(DecompositionResult {
        g_components,
        g_field,
        report,
    })
}
