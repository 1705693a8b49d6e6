//! Polydisc discretization: tensor-product Cartesian grids on the bounding
//! squares of each disc factor, disc masks, sampled complex fields,
//! finite-difference Wirtinger derivatives, and interior-region reductions.
//!
//! Each complex variable gets an M×M cell-centered grid. A node belongs to
//! the mask when every complex coordinate lies strictly inside its open disc;
//! a node belongs to the sampling support when every coordinate's cell meets
//! its open disc (the support adds a half-cell ghost ring used by the
//! Cauchy-transform quadrature; all reductions in this module stay masked).
//!
//! Reductions (maxima, sums) always run serially in index order so repeated
//! runs agree bitwise regardless of thread count.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num::complex::Complex64;
use num::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exterior::Coefficient;
use crate::symbolic::PolyExpr;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid polydisc spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite sample value at node {0:?}")]
    NonFiniteSample(Vec<Complex64>),
    #[error("empty interior region for shrink factor {0}")]
    EmptyInterior(f64),
    #[error("grid mismatch: fields live on different specs")]
    SpecMismatch,
    #[error("field i/o: {0}")]
    Io(String),
}

/// Product-domain description: centers and radii per complex variable, grid
/// resolution M (points per real axis), and the interior evaluation factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolydiscSpec {
    pub n: usize,
    #[serde(with = "complex_vec_serde")]
    pub centers: Vec<Complex64>,
    pub radii: Vec<f64>,
    pub m: usize,
    pub shrink: f64,
}

mod complex_vec_serde {
    use num::complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

impl PolydiscSpec {
    pub fn unit(n: usize, m: usize) -> Self {
        PolydiscSpec {
            n,
            centers: vec![Complex64::zero(); n],
            radii: vec![1.0; n],
            m,
            shrink: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n == 0 {
            return Err(GridError::InvalidSpec("n must be at least 1".into()));
        }
        if self.centers.len() != self.n || self.radii.len() != self.n {
            return Err(GridError::InvalidSpec(
                "centers/radii length must equal n".into(),
            ));
        }
        if self.radii.iter().any(|&r| r <= 0.0 || !r.is_finite()) {
            return Err(GridError::InvalidSpec("radii must be positive".into()));
        }
        if self.centers.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(GridError::InvalidSpec("centers must be finite".into()));
        }
        if self.m < 8 || !self.m.is_multiple_of(2) {
            return Err(GridError::InvalidSpec(format!(
                "M = {} must be even and at least 8",
                self.m
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(GridError::InvalidSpec(format!(
                "shrink = {} must lie in (0,1)",
                self.shrink
            )));
        }
        Ok(())
    }
}

/// Per-variable disc geometry. Node p = ix·M + iy carries the complex
/// coordinate (x_ix, y_iy); x-runs (fixed iy) and y-runs (fixed ix) of masked
/// nodes are contiguous because discs are convex.
pub struct AxisGeometry {
    pub center: Complex64,
    pub radius: f64,
    pub m: usize,
    pub h: f64,
    pub coords: Vec<Complex64>,
    pub mask: Vec<bool>,
    pub support: Vec<bool>,
    /// Masked ix-range per iy.
    pub x_runs: Vec<Option<(usize, usize)>>,
    /// Masked iy-range per ix.
    pub y_runs: Vec<Option<(usize, usize)>>,
}

impl AxisGeometry {
    fn new(center: Complex64, radius: f64, m: usize) -> Self {
        let h = 2.0 * radius / m as f64;
        let coord_1d: Vec<f64> = (0..m)
            .map(|k| -radius + (k as f64 + 0.5) * h)
            .collect();
        let mut coords = Vec::with_capacity(m * m);
        let mut mask = Vec::with_capacity(m * m);
        let mut support = Vec::with_capacity(m * m);
        let ghost = h * std::f64::consts::FRAC_1_SQRT_2;
        for ix in 0..m {
            for iy in 0..m {
                let z = center + Complex64::new(coord_1d[ix], coord_1d[iy]);
                let d = (z - center).norm();
                coords.push(z);
                mask.push(d < radius);
                support.push(d < radius + ghost);
            }
        }
        let mut x_runs = vec![None; m];
        let mut y_runs = vec![None; m];
        for iy in 0..m {
            let masked: Vec<usize> = (0..m).filter(|&ix| mask[ix * m + iy]).collect();
            if let (Some(&lo), Some(&hi)) = (masked.first(), masked.last()) {
                debug_assert_eq!(masked.len(), hi - lo + 1, "mask runs must be contiguous");
                x_runs[iy] = Some((lo, hi));
            }
        }
        for ix in 0..m {
            let masked: Vec<usize> = (0..m).filter(|&iy| mask[ix * m + iy]).collect();
            if let (Some(&lo), Some(&hi)) = (masked.first(), masked.last()) {
                y_runs[ix] = Some((lo, hi));
            }
        }
        AxisGeometry {
            center,
            radius,
            m,
            h,
            coords,
            mask,
            support,
            x_runs,
            y_runs,
        }
    }
}

/// Shared grid geometry: per-axis discs, the full product mask, and strides.
pub struct GridGeometry {
    pub spec: PolydiscSpec,
    pub axes: Vec<AxisGeometry>,
    pub mask: Vec<bool>,
    pub strides: Vec<usize>,
    pub total: usize,
}

impl GridGeometry {
    pub fn new(spec: PolydiscSpec) -> Result<Arc<Self>, GridError> {
        spec.validate()?;
        let m2 = spec.m * spec.m;
        let axes: Vec<AxisGeometry> = (0..spec.n)
            .map(|j| AxisGeometry::new(spec.centers[j], spec.radii[j], spec.m))
            .collect();
        let total = m2.pow(spec.n as u32);
        let mut strides = vec![0usize; spec.n];
        let mut acc = 1usize;
        for j in (0..spec.n).rev() {
            strides[j] = acc;
            acc *= m2;
        }
        let mut mask = vec![false; total];
        let mut idx_parts = vec![0usize; spec.n];
        for (idx, m_out) in mask.iter_mut().enumerate() {
            let mut rem = idx;
            let mut ok = true;
            for j in 0..spec.n {
                idx_parts[j] = rem / strides[j];
                rem %= strides[j];
                if !axes[j].mask[idx_parts[j]] {
                    ok = false;
                    break;
                }
            }
            *m_out = ok;
        }
        Ok(Arc::new(GridGeometry {
            spec,
            axes,
            mask,
            strides,
            total,
        }))
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    /// Decompose a flat index into per-axis node indices.
    pub fn split_index(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        self.strides
            .iter()
            .map(|&s| {
                let p = rem / s;
                rem %= s;
                p
            })
            .collect()
    }

    /// The complex point at a flat index.
    pub fn point(&self, idx: usize) -> Vec<Complex64> {
        self.split_index(idx)
            .iter()
            .zip(&self.axes)
            .map(|(&p, ax)| ax.coords[p])
            .collect()
    }

    pub fn in_support(&self, idx: usize) -> bool {
        self.split_index(idx)
            .iter()
            .zip(&self.axes)
            .all(|(&p, ax)| ax.support[p])
    }

    /// Per-axis interior flags for the ρ-shrunken region.
    fn interior_axis_flags(&self, rho: f64) -> Vec<Vec<bool>> {
        self.axes
            .iter()
            .map(|ax| {
                ax.coords
                    .iter()
                    .map(|z| (z - ax.center).norm() <= rho * ax.radius)
                    .collect()
            })
            .collect()
    }

    /// Volume element: product over axes of h_j².
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|ax| ax.h * ax.h).product()
    }
}

/// Complex field sampled over the full tensor grid. Values outside the mask
/// are stored but ignored by every reduction in this module.
#[derive(Clone)]
pub struct GridField {
    geom: Arc<GridGeometry>,
    values: Vec<Complex64>,
}

impl GridField {
    pub fn zeros(geom: &Arc<GridGeometry>) -> Self {
        GridField {
            geom: geom.clone(),
            values: vec![Complex64::zero(); geom.total],
        }
    }

    pub fn from_values(geom: &Arc<GridGeometry>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), geom.total);
        GridField {
            geom: geom.clone(),
            values,
        }
    }

    pub fn geometry(&self) -> &Arc<GridGeometry> {
        &self.geom
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    fn check_same_geom(&self, other: &Self) {
        assert!(
            self.geom.spec == other.geom.spec,
            "fields live on different specs"
        );
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64 + Sync) -> Self {
        self.check_same_geom(other);
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridField {
            geom: self.geom.clone(),
            values,
        }
    }

    pub fn map_values(&self, f: impl Fn(Complex64) -> Complex64 + Sync) -> Self {
        let values = self.values.par_iter().map(|&a| f(a)).collect();
        GridField {
            geom: self.geom.clone(),
            values,
        }
    }

    pub fn add_field(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub_field(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul_field(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale_by(&self, c: Complex64) -> Self {
        self.map_values(|a| a * c)
    }

    pub fn conj_field(&self) -> Self {
        self.map_values(|a| a.conj())
    }
}

impl Coefficient for GridField {
    fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }
    fn add(&self, rhs: &Self) -> Self {
        self.add_field(rhs)
    }
    fn neg(&self) -> Self {
        self.map_values(|a| -a)
    }
    fn mul(&self, rhs: &Self) -> Self {
        self.mul_field(rhs)
    }
    fn dbar(&self, axis: usize) -> Self {
        fd_dbar(self, axis)
    }
    fn conj(&self) -> Self {
        self.conj_field()
    }
}

impl fmt::Debug for GridField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "GridField[n={}, M={}]",
            self.geom.spec.n, self.geom.spec.m
        )
    }
}

/// Pointwise sampling of an evaluator over the support; masked-node values
/// must come out finite.
pub fn sample_fn(
    geom: &Arc<GridGeometry>,
    f: &(dyn Fn(&[Complex64]) -> Complex64 + Sync),
) -> Result<GridField, GridError> {
    let n = geom.n();
    let values: Vec<Complex64> = (0..geom.total)
        .into_par_iter()
        .map(|idx| {
            if !geom.in_support(idx) {
                return Complex64::zero();
            }
            let mut pt = Vec::with_capacity(n);
            let mut rem = idx;
            for j in 0..n {
                let p = rem / geom.strides[j];
                rem %= geom.strides[j];
                pt.push(geom.axes[j].coords[p]);
            }
            f(&pt)
        })
        .collect();
    for (idx, v) in values.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(GridError::NonFiniteSample(geom.point(idx)));
        }
    }
    Ok(GridField {
        geom: geom.clone(),
        values,
    })
}

pub fn sample_poly(geom: &Arc<GridGeometry>, p: &PolyExpr) -> Result<GridField, GridError> {
    assert_eq!(p.n(), geom.n(), "polynomial dimension");
    sample_fn(geom, &|z: &[Complex64]| p.eval(z))
}

// ---------------------------------------------------------------------------
// finite differences

/// First-derivative stencils along a contiguous run. All are 4th order on
/// runs of five or more nodes (one-sided within 2 cells of the run ends);
/// shorter runs fall back to the best available order.
fn derive_run(vals: &[Complex64], h: f64, out: &mut [Complex64]) {
    let n = vals.len();
    debug_assert_eq!(out.len(), n);
    let inv12 = 1.0 / (12.0 * h);
    match n {
        0 => {}
        1 => out[0] = Complex64::zero(),
        2 => {
            let d = (vals[1] - vals[0]) / h;
            out[0] = d;
            out[1] = d;
        }
        3 => {
            let inv2 = 1.0 / (2.0 * h);
            out[0] = (-3.0 * vals[0] + 4.0 * vals[1] - vals[2]) * inv2;
            out[1] = (vals[2] - vals[0]) * inv2;
            out[2] = (vals[0] - 4.0 * vals[1] + 3.0 * vals[2]) * inv2;
        }
        4 => {
            let inv6 = 1.0 / (6.0 * h);
            out[0] = (-11.0 * vals[0] + 18.0 * vals[1] - 9.0 * vals[2] + 2.0 * vals[3]) * inv6;
            out[1] = (-2.0 * vals[0] - 3.0 * vals[1] + 6.0 * vals[2] - vals[3]) * inv6;
            out[2] = (vals[0] - 6.0 * vals[1] + 3.0 * vals[2] + 2.0 * vals[3]) * inv6;
            out[3] = (-2.0 * vals[0] + 9.0 * vals[1] - 18.0 * vals[2] + 11.0 * vals[3]) * inv6;
        }
        _ => {
            out[0] = (-25.0 * vals[0] + 48.0 * vals[1] - 36.0 * vals[2] + 16.0 * vals[3]
                - 3.0 * vals[4])
                * inv12;
            out[1] = (-3.0 * vals[0] - 10.0 * vals[1] + 18.0 * vals[2] - 6.0 * vals[3]
                + vals[4])
                * inv12;
            for i in 2..n - 2 {
                out[i] =
                    (vals[i - 2] - 8.0 * vals[i - 1] + 8.0 * vals[i + 1] - vals[i + 2]) * inv12;
            }
            out[n - 2] = (3.0 * vals[n - 1] + 10.0 * vals[n - 2] - 18.0 * vals[n - 3]
                + 6.0 * vals[n - 4]
                - vals[n - 5])
                * inv12;
            out[n - 1] = (25.0 * vals[n - 1] - 48.0 * vals[n - 2] + 36.0 * vals[n - 3]
                - 16.0 * vals[n - 4]
                + 3.0 * vals[n - 5])
                * inv12;
        }
    }
}

struct LineSet {
    /// (base flat offset, node stride, run length)
    lines: Vec<(usize, usize, usize)>,
    max_len: usize,
}

/// All masked derivative lines for `axis` in direction `dir` (0 = x, 1 = y).
fn collect_lines(geom: &GridGeometry, axis: usize, dir: usize) -> LineSet {
    let m = geom.m();
    let ax = &geom.axes[axis];
    let stride = geom.strides[axis];
    // enumerate masked combinations of the other axes
    let mut outer_bases = vec![0usize];
    for j in 0..geom.n() {
        if j == axis {
            continue;
        }
        let mut next = Vec::with_capacity(outer_bases.len() * m * m);
        for &b in &outer_bases {
            for p in 0..m * m {
                if geom.axes[j].mask[p] {
                    next.push(b + p * geom.strides[j]);
                }
            }
        }
        outer_bases = next;
    }
    let mut lines = Vec::new();
    let mut max_len = 0;
    for &base in &outer_bases {
        if dir == 0 {
            for iy in 0..m {
                if let Some((lo, hi)) = ax.x_runs[iy] {
                    let len = hi - lo + 1;
                    max_len = max_len.max(len);
                    lines.push((base + (lo * m + iy) * stride, m * stride, len));
                }
            }
        } else {
            for ix in 0..m {
                if let Some((lo, hi)) = ax.y_runs[ix] {
                    let len = hi - lo + 1;
                    max_len = max_len.max(len);
                    lines.push((base + (ix * m + lo) * stride, stride, len));
                }
            }
        }
    }
    LineSet { lines, max_len }
}

/// Accumulate `scale`·(d/d(coord) f along axis/dir) into `out`.
fn accumulate_direction(
    f: &GridField,
    axis: usize,
    dir: usize,
    scale: Complex64,
    out: &mut [Complex64],
) {
    let geom = &f.geom;
    let h = geom.axes[axis].h;
    let set = collect_lines(geom, axis, dir);
    if set.lines.is_empty() {
        return;
    }
    let width = set.max_len;
    let mut gathered = vec![Complex64::zero(); set.lines.len() * width];
    let mut derived = vec![Complex64::zero(); set.lines.len() * width];
    // gather
    gathered
        .par_chunks_mut(width)
        .zip(set.lines.par_iter())
        .for_each(|(row, &(base, stride, len))| {
            for (i, slot) in row.iter_mut().take(len).enumerate() {
                *slot = f.values[base + i * stride];
            }
        });
    // differentiate rows in parallel
    derived
        .par_chunks_mut(width)
        .zip(gathered.par_chunks(width))
        .zip(set.lines.par_iter())
        .for_each(|((drow, grow), &(_, _, len))| {
            derive_run(&grow[..len], h, &mut drow[..len]);
        });
    // scatter serially
    for (row, &(base, stride, len)) in derived.chunks(width).zip(&set.lines) {
        for (i, &d) in row.iter().take(len).enumerate() {
            out[base + i * stride] += scale * d;
        }
    }
}

/// Finite-difference Wirtinger derivative ∂/∂z̄_j = ½(∂/∂x_j + i ∂/∂y_j)
/// with a 1-based axis. Output values are zero outside the mask.
pub fn fd_dbar(f: &GridField, axis: usize) -> GridField {
    assert!(axis >= 1 && axis <= f.geom.n(), "axis out of range");
    let j = axis - 1;
    let mut out = vec![Complex64::zero(); f.geom.total];
    accumulate_direction(f, j, 0, Complex64::new(0.5, 0.0), &mut out);
    accumulate_direction(f, j, 1, Complex64::new(0.0, 0.5), &mut out);
    for (idx, v) in out.iter_mut().enumerate() {
        if !f.geom.mask[idx] {
            *v = Complex64::zero();
        }
    }
    GridField {
        geom: f.geom.clone(),
        values: out,
    }
}

// ---------------------------------------------------------------------------
// reductions

/// Max |f| over masked nodes whose per-variable distance to the center is at
/// most ρ·radius. Serial scan in index order.
pub fn interior_max(f: &GridField, rho: f64) -> Result<f64, GridError> {
    assert!(rho > 0.0 && rho <= 1.0, "shrink factor out of range");
    let geom = &f.geom;
    let flags = geom.interior_axis_flags(rho);
    let mut best: Option<f64> = None;
    let n = geom.n();
    for (idx, v) in f.values.iter().enumerate() {
        if !geom.mask[idx] {
            continue;
        }
        let mut rem = idx;
        let mut inside = true;
        for j in 0..n {
            let p = rem / geom.strides[j];
            rem %= geom.strides[j];
            if !flags[j][p] {
                inside = false;
                break;
            }
        }
        if inside {
            let mag = v.norm();
            best = Some(best.map_or(mag, |b| b.max(mag)));
        }
    }
    best.ok_or(GridError::EmptyInterior(rho))
}

/// Interior max of a form's components (max over all coefficients).
pub fn form_interior_max(
    form: &crate::exterior::KoszulForm<GridField>,
    rho: f64,
) -> Result<f64, GridError> {
    let mut best = 0.0f64;
    for (_, _, c) in form.iter() {
        best = best.max(interior_max(c, rho)?);
    }
    Ok(best)
}

/// Discrete L² norm: (Σ_masked |f|² · cell volume)^(1/2), Kahan-summed in
/// index order.
pub fn l2_norm(f: &GridField) -> f64 {
    let geom = &f.geom;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (idx, v) in f.values.iter().enumerate() {
        if !geom.mask[idx] {
            continue;
        }
        let term = v.norm_sqr();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    (sum * geom.cell_volume()).sqrt()
}

// ---------------------------------------------------------------------------
// CSV snapshots

/// Write the field as CSV rows `x1,y1,…,xn,yn,re,im` over support nodes.
pub fn write_csv<W: Write>(f: &GridField, mut w: W) -> Result<(), GridError> {
    let geom = &f.geom;
    let n = geom.n();
    let mut header = Vec::new();
    for j in 1..=n {
        header.push(format!("x{j}"));
        header.push(format!("y{j}"));
    }
    header.push("re".into());
    header.push("im".into());
    writeln!(w, "{}", header.join(",")).map_err(|e| GridError::Io(e.to_string()))?;
    for idx in 0..geom.total {
        if !geom.in_support(idx) {
            continue;
        }
        let pt = geom.point(idx);
        let mut row = String::new();
        for z in &pt {
            row.push_str(&format!("{},{},", z.re, z.im));
        }
        row.push_str(&format!("{},{}", f.values[idx].re, f.values[idx].im));
        writeln!(w, "{row}").map_err(|e| GridError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Read a field written by [`write_csv`] back onto the same geometry.
pub fn read_csv<R: BufRead>(geom: &Arc<GridGeometry>, r: R) -> Result<GridField, GridError> {
    let n = geom.n();
    let mut values = vec![Complex64::zero(); geom.total];
    let mut lines = r.lines();
    let _header = lines
        .next()
        .ok_or_else(|| GridError::Io("empty csv".into()))?
        .map_err(|e| GridError::Io(e.to_string()))?;
    let mut support_indices = (0..geom.total).filter(|&idx| geom.in_support(idx));
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| GridError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 * n + 2 {
            return Err(GridError::Io(format!(
                "row {}: expected {} columns, found {}",
                lineno + 2,
                2 * n + 2,
                parts.len()
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GridError::Io(format!("row {}: {}", lineno + 2, e)))?;
        let idx = support_indices.next().ok_or_else(|| {
            GridError::Io("more rows than support nodes".into())
        })?;
        let pt = geom.point(idx);
        for j in 0..n {
            if (nums[2 * j] - pt[j].re).abs() > 1e-12 || (nums[2 * j + 1] - pt[j].im).abs() > 1e-12
            {
                return Err(GridError::Io(format!(
                    "row {}: node coordinates do not match the grid",
                    lineno + 2
                )));
            }
        }
        values[idx] = Complex64::new(nums[2 * n], nums[2 * n + 1]);
    }
    if support_indices.next().is_some() {
        return Err(GridError::Io("fewer rows than support nodes".into()));
    }
    Ok(GridField {
        geom: geom.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::crat_from_i64;

    fn unit_geom(n: usize, m: usize) -> Arc<GridGeometry> {
        GridGeometry::new(PolydiscSpec::unit(n, m)).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(PolydiscSpec::unit(2, 16).validate().is_ok());
        assert!(PolydiscSpec::unit(2, 7).validate().is_err());
        assert!(PolydiscSpec::unit(2, 10).validate().is_ok());
        let mut bad = PolydiscSpec::unit(1, 16);
        bad.radii[0] = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = PolydiscSpec::unit(1, 16);
        bad.shrink = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sample_constant_and_coordinates() {
        let geom = unit_geom(2, 16);
        let ones = sample_fn(&geom, &|_| Complex64::new(1.0, 0.0)).unwrap();
        for (idx, v) in ones.values().iter().enumerate() {
            if geom.mask[idx] {
                assert_eq!(*v, Complex64::new(1.0, 0.0));
            }
        }
        let z1 = sample_fn(&geom, &|z| z[0]).unwrap();
        for idx in 0..geom.total {
            if geom.mask[idx] {
                assert_eq!(z1.values()[idx], geom.point(idx)[0]);
            }
        }
        let e = sample_fn(&geom, &|z| (z[0] + z[1]).exp()).unwrap();
        // center-most node value is exp of its coordinate, ~1 near the origin
        let idx = (0..geom.total)
            .filter(|&i| geom.mask[i])
            .min_by(|&a, &b| {
                let pa: f64 = geom.point(a).iter().map(|z| z.norm_sqr()).sum();
                let pb: f64 = geom.point(b).iter().map(|z| z.norm_sqr()).sum();
                pa.partial_cmp(&pb).unwrap()
            })
            .unwrap();
        let pt = geom.point(idx);
        assert!((e.values()[idx] - (pt[0] + pt[1]).exp()).norm() < 1e-15);
    }

    #[test]
    fn sample_rejects_non_finite() {
        let geom = unit_geom(1, 16);
        // pole placed at an interior masked node
        let pole = geom
            .axes[0]
            .coords
            .iter()
            .zip(&geom.axes[0].mask)
            .find(|(_, &m)| m)
            .map(|(z, _)| *z)
            .unwrap();
        let r = sample_fn(&geom, &|z| Complex64::new(1.0, 0.0) / (z[0] - pole));
        assert!(matches!(r, Err(GridError::NonFiniteSample(_))));
    }

    #[test]
    fn fd_dbar_linear_exact() {
        let geom = unit_geom(1, 16);
        let f = sample_fn(&geom, &|z| z[0].conj()).unwrap();
        let d = fd_dbar(&f, 1);
        let err = interior_max(
            &d.sub_field(&sample_fn(&geom, &|_| Complex64::new(1.0, 0.0)).unwrap()),
            0.9,
        )
        .unwrap();
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn fd_dbar_holomorphic_small() {
        let geom = unit_geom(2, 16);
        let f = sample_fn(&geom, &|z| z[0] * z[0] * z[1]).unwrap();
        for axis in 1..=2 {
            let err = interior_max(&fd_dbar(&f, axis), 0.9).unwrap();
            assert!(err < 1e-11, "axis {axis}: {err}");
        }
    }

    #[test]
    fn fd_dbar_matches_symbolic_oracle() {
        // f = z1 z̄1, ∂̄_1 f = z1, checked against poly_dbar + sample
        let geom = unit_geom(1, 32);
        let p = PolyExpr::var(1, 1).mul(&PolyExpr::conj_var(1, 1));
        let f = sample_poly(&geom, &p).unwrap();
        let d = fd_dbar(&f, 1);
        let oracle = sample_poly(&geom, &p.dbar(1)).unwrap();
        let err = interior_max(&d.sub_field(&oracle), 0.9).unwrap();
        assert!(err < 1e-11, "err = {err}");
    }

    #[test]
    fn fd_dbar_degree6_oracle_order() {
        // degree-6 polynomial: 4th-order stencils are not exact, but the
        // residual against the symbolic oracle shrinks like h^3 or better
        let p = {
            let z = PolyExpr::var(1, 1);
            let zb = PolyExpr::conj_var(1, 1);
            let z3 = z.mul(&z).mul(&z);
            let zb3 = zb.mul(&zb).mul(&zb);
            z3.mul(&zb3)
        };
        let mut errs = Vec::new();
        for m in [16usize, 32] {
            let geom = unit_geom(1, m);
            let f = sample_poly(&geom, &p).unwrap();
            let d = fd_dbar(&f, 1);
            let oracle = sample_poly(&geom, &p.dbar(1)).unwrap();
            errs.push(interior_max(&d.sub_field(&oracle), 0.9).unwrap());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 2.5, "observed order {order} from {errs:?}");
    }

    #[test]
    fn interior_max_brute_force() {
        let geom = unit_geom(1, 64);
        let f = sample_fn(&geom, &|z| z[0]).unwrap();
        let m = interior_max(&f, 0.5).unwrap();
        // brute: max |z| over nodes with |z| <= 0.5
        let mut brute = 0.0f64;
        for idx in 0..geom.total {
            if geom.mask[idx] {
                let z = geom.point(idx)[0];
                if z.norm() <= 0.5 {
                    brute = brute.max(z.norm());
                }
            }
        }
        assert_eq!(m, brute);
        assert!((m - 0.5).abs() < 0.05);
        let zero = GridField::zeros(&geom);
        assert_eq!(interior_max(&zero, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn interior_max_empty_region_errors() {
        let geom = unit_geom(1, 16);
        let f = GridField::zeros(&geom);
        assert!(matches!(
            interior_max(&f, 0.01),
            Err(GridError::EmptyInterior(_))
        ));
    }

    #[test]
    fn l2_norm_disc_area() {
        // ‖1‖ on the unit disc ≈ √π within quadrature error of the area
        let geom = unit_geom(1, 64);
        let ones = sample_fn(&geom, &|_| Complex64::new(1.0, 0.0)).unwrap();
        let norm = l2_norm(&ones);
        assert!(
            (norm - std::f64::consts::PI.sqrt()).abs() < 2e-2,
            "norm = {norm}"
        );
        assert_eq!(l2_norm(&GridField::zeros(&geom)), 0.0);
    }

    #[test]
    fn l2_norm_homogeneous() {
        let geom = unit_geom(2, 16);
        let f = sample_fn(&geom, &|z| (z[0] * z[1]).exp()).unwrap();
        let c = Complex64::new(-2.5, 1.5);
        let lhs = l2_norm(&f.scale_by(c));
        let rhs = c.norm() * l2_norm(&f);
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn reductions_monotone_under_domination() {
        let geom = unit_geom(1, 16);
        let f = sample_fn(&geom, &|z| z[0]).unwrap();
        let g = sample_fn(&geom, &|z| z[0] * Complex64::new(2.0, 0.0)).unwrap();
        assert!(interior_max(&f, 0.9).unwrap() <= interior_max(&g, 0.9).unwrap());
        assert!(l2_norm(&f) <= l2_norm(&g));
    }

    #[test]
    fn csv_roundtrip() {
        let geom = unit_geom(2, 8);
        let p = PolyExpr::var(2, 1)
            .mul(&PolyExpr::conj_var(2, 2))
            .scale(&crat_from_i64(3, -2));
        let f = sample_poly(&geom, &p).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let back = read_csv(&geom, std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(f.values(), back.values());
    }
}
