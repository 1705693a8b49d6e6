//! Exterior algebra over form-valued coefficients: elements of
//! Γ_(r,s) = ∧^r V ⊗ C_(0,s), the wedge product, the contraction τ_F against
//! a holomorphic map F, and the ∂̄ action on the dz̄ factor.
//!
//! The e-factor and the dz̄-factor carry independent gradings that commute
//! with each other, so a wedge picks up sign(e-merge)·sign(dz̄-merge) and no
//! cross term. τ_F lowers e-degree and commutes with ∂̄; both square to zero.
//!
//! Everything is generic over a coefficient algebra so that one
//! implementation serves the exact polynomial backend and the gridded one.

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex64;
use thiserror::Error;

use crate::symbolic::PolyExpr;

/// Coefficient algebra required by forms: pointwise ring operations plus a
/// per-variable ∂̄ and conjugation. Implementations are value-semantic and
/// never inspected by this module.
pub trait Coefficient: Clone {
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    /// ∂/∂z̄_j with a 1-based axis.
    fn dbar(&self, axis: usize) -> Self;
    fn conj(&self) -> Self;

    fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }
}

impl Coefficient for PolyExpr {
    fn is_zero(&self) -> bool {
        PolyExpr::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        PolyExpr::add(self, rhs).expect("coefficient dimension")
    }
    fn neg(&self) -> Self {
        PolyExpr::neg(self)
    }
    fn mul(&self, rhs: &Self) -> Self {
        PolyExpr::mul(self, rhs)
    }
    fn dbar(&self, axis: usize) -> Self {
        PolyExpr::dbar(self, axis)
    }
    fn conj(&self) -> Self {
        PolyExpr::conj(self)
    }
}

#[derive(Debug, Error)]
pub enum ExteriorError {
    #[error("dimension mismatch: forms over n={0} and n={1}")]
    DimensionMismatch(usize, usize),
    #[error("degree mismatch: ({0},{1}) vs ({2},{3})")]
    DegreeMismatch(usize, usize, usize, usize),
    #[error("invalid multi-index {0:?} for n={1}")]
    InvalidIndex(Vec<u8>, usize),
}

/// Merge two strictly increasing index lists, returning the merged list and
/// the permutation sign, or None when they share an index (wedge → 0).
fn merge_indices(a: &[u8], b: &[u8]) -> Option<(Vec<u8>, i8)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut sign = 1i8;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the remaining a-entries
            if (a.len() - i) % 2 == 1 {
                sign = -sign;
            }
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, sign))
}

fn validate_index(indices: &[u8], n: usize) -> Result<(), ExteriorError> {
    let ok = indices.windows(2).all(|w| w[0] < w[1])
        && indices.iter().all(|&j| j >= 1 && j as usize <= n);
    if ok {
        Ok(())
    } else {
        Err(ExteriorError::InvalidIndex(indices.to_vec(), n))
    }
}

/// Basis multi-index J for e_{j1}∧…∧e_{jr}; strictly increasing, 1-based.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExteriorIndex(Vec<u8>);

/// dz̄ multi-index K of a (0,s)-form component; strictly increasing, 1-based.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConjIndex(Vec<u8>);

macro_rules! index_impl {
    ($ty:ident) => {
        impl $ty {
            pub fn new(indices: Vec<u8>, n: usize) -> Result<Self, ExteriorError> {
                validate_index(&indices, n)?;
                Ok($ty(indices))
            }

            pub fn empty() -> Self {
                $ty(Vec::new())
            }

            pub fn single(j: u8) -> Self {
                $ty(vec![j])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn indices(&self) -> &[u8] {
                &self.0
            }

            pub fn contains(&self, j: u8) -> bool {
                self.0.binary_search(&j).is_ok()
            }

            pub fn max_index(&self) -> Option<u8> {
                self.0.last().copied()
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:?}", self.0)
            }
        }
    };
}

index_impl!(ExteriorIndex);
index_impl!(ConjIndex);

/// Holomorphic map F = (f_1, …, f_n); in the Gleason pipeline F(z) = z − α.
#[derive(Clone)]
pub struct HolomorphicMap<C> {
    components: Vec<C>,
    pub zero_locus_hint: Option<Vec<Complex64>>,
}

impl<C: Coefficient> HolomorphicMap<C> {
    pub fn new(components: Vec<C>) -> Self {
        assert!(!components.is_empty(), "empty holomorphic map");
        HolomorphicMap {
            components,
            zero_locus_hint: None,
        }
    }

    pub fn with_zero_locus(mut self, point: Vec<Complex64>) -> Self {
        self.zero_locus_hint = Some(point);
        self
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, j: usize) -> &C {
        &self.components[j - 1]
    }
}

/// Element of Γ_(r,s): sparse map from (J, K) multi-indices to coefficients.
/// Absent keys are zero; zero coefficients are pruned after every operation.
#[derive(Clone, Debug)]
pub struct KoszulForm<C> {
    n: usize,
    r: usize,
    s: usize,
    components: BTreeMap<(ExteriorIndex, ConjIndex), C>,
}

impl<C: Coefficient> KoszulForm<C> {
    pub fn zero(n: usize, r: usize, s: usize) -> Self {
        KoszulForm {
            n,
            r,
            s,
            components: BTreeMap::new(),
        }
    }

    pub fn from_component(
        n: usize,
        e_idx: ExteriorIndex,
        c_idx: ConjIndex,
        coeff: C,
    ) -> Result<Self, ExteriorError> {
        validate_index(e_idx.indices(), n)?;
        validate_index(c_idx.indices(), n)?;
        let mut form = Self::zero(n, e_idx.len(), c_idx.len());
        form.accumulate(e_idx, c_idx, coeff);
        Ok(form)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn exterior_degree(&self) -> usize {
        self.r
    }

    pub fn conj_degree(&self) -> usize {
        self.s
    }

    pub fn is_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, e_idx: &ExteriorIndex, c_idx: &ConjIndex) -> Option<&C> {
        self.components.get(&(e_idx.clone(), c_idx.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ExteriorIndex, &ConjIndex, &C)> {
        self.components.iter().map(|((e, k), c)| (e, k, c))
    }

    /// Add `coeff` into the (J, K) slot, pruning when the sum vanishes.
    pub fn accumulate(&mut self, e_idx: ExteriorIndex, c_idx: ConjIndex, coeff: C) {
        debug_assert_eq!(e_idx.len(), self.r);
        debug_assert_eq!(c_idx.len(), self.s);
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.components.entry((e_idx, c_idx)) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().add(&coeff);
                if sum.is_zero() {
                    o.remove();
                } else {
                    o.insert(sum);
                }
            }
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<(), ExteriorError> {
        if self.n != other.n {
            return Err(ExteriorError::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_compatible(other)?;
        if self.r != other.r || self.s != other.s {
            // adding a zero form of any declared degree is harmless
            if other.is_zero() {
                return Ok(self.clone());
            }
            if self.is_zero() {
                return Ok(other.clone());
            }
            return Err(ExteriorError::DegreeMismatch(
                self.r, self.s, other.r, other.s,
            ));
        }
        let mut out = self.clone();
        for ((e, k), c) in &other.components {
            out.accumulate(e.clone(), k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        KoszulForm {
            n: self.n,
            r: self.r,
            s: self.s,
            components: self
                .components
                .iter()
                .map(|(k, c)| (k.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.add(&other.neg())
    }

    /// Multiply every component by a scalar coefficient.
    pub fn scale(&self, c: &C) -> Self {
        let mut out = Self::zero(self.n, self.r, self.s);
        for ((e, k), v) in &self.components {
            out.accumulate(e.clone(), k.clone(), v.mul(c));
        }
        out
    }

    pub fn map<D: Coefficient>(&self, mut f: impl FnMut(&C) -> D) -> KoszulForm<D> {
        let mut out = KoszulForm::zero(self.n, self.r, self.s);
        for ((e, k), v) in &self.components {
            out.accumulate(e.clone(), k.clone(), f(v));
        }
        out
    }

    /// Wedge product. The e-merge and dz̄-merge contribute independent signs;
    /// degree overflow past n yields the zero form.
    pub fn wedge(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_compatible(other)?;
        let r = (self.r + other.r).min(self.n);
        let s = (self.s + other.s).min(self.n);
        let mut out = Self::zero(self.n, r, s);
        if self.r + other.r > self.n || self.s + other.s > self.n {
            return Ok(out);
        }
        for ((ea, ka), ca) in &self.components {
            for ((eb, kb), cb) in &other.components {
                let Some((e, se)) = merge_indices(ea.indices(), eb.indices()) else {
                    continue;
                };
                let Some((k, sk)) = merge_indices(ka.indices(), kb.indices()) else {
                    continue;
                };
                let mut coeff = ca.mul(cb);
                if se * sk < 0 {
                    coeff = coeff.neg();
                }
                out.accumulate(ExteriorIndex(e), ConjIndex(k), coeff);
            }
        }
        Ok(out)
    }

    /// Contraction against F: e_{j1}∧…∧e_{jr} ⊗ w ↦
    /// Σ_k (−1)^(k−1) f_{jk} · (e-block without j_k) ⊗ w.
    pub fn tau(&self, map: &HolomorphicMap<C>) -> Result<Self, ExteriorError> {
        if map.n() != self.n {
            return Err(ExteriorError::DimensionMismatch(map.n(), self.n));
        }
        if self.r == 0 {
            return Ok(Self::zero(self.n, 0, self.s));
        }
        let mut out = Self::zero(self.n, self.r - 1, self.s);
        for ((e, k), c) in &self.components {
            for (pos, &j) in e.indices().iter().enumerate() {
                let mut rest = e.indices().to_vec();
                rest.remove(pos);
                let mut coeff = map.component(j as usize).mul(c);
                if pos % 2 == 1 {
                    coeff = coeff.neg();
                }
                out.accumulate(ExteriorIndex(rest), k.clone(), coeff);
            }
        }
        Ok(out)
    }

    /// ∂̄ on the dz̄ factor only: w dz̄_K ↦ Σ_j (∂w/∂z̄_j) dz̄_j∧dz̄_K with the
    /// usual merge sign. Input at s = n returns the zero form.
    pub fn dbar_form(&self) -> Self {
        if self.s >= self.n {
            return Self::zero(self.n, self.r, self.n);
        }
        let mut out = Self::zero(self.n, self.r, self.s + 1);
        for ((e, k), c) in &self.components {
            for j in 1..=self.n as u8 {
                if k.contains(j) {
                    continue;
                }
                let d = c.dbar(j as usize);
                if d.is_zero() {
                    continue;
                }
                let (merged, sign) =
                    merge_indices(&[j], k.indices()).expect("disjoint by check");
                let coeff = if sign < 0 { d.neg() } else { d };
                out.accumulate(e.clone(), ConjIndex(merged), coeff);
            }
        }
        out
    }

    /// Largest variable index appearing in any dz̄ multi-index.
    pub fn max_conj_index(&self) -> Option<u8> {
        self.components
            .keys()
            .filter_map(|(_, k)| k.max_index())
            .max()
    }

    /// The set of exterior indices present.
    pub fn exterior_indices(&self) -> Vec<ExteriorIndex> {
        let mut out: Vec<_> = self.components.keys().map(|(e, _)| e.clone()).collect();
        out.dedup();
        out
    }
}

impl<C: Coefficient + fmt::Display> fmt::Display for KoszulForm<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return write!(f, "0 [({},{})-form]", self.r, self.s);
        }
        let mut first = true;
        for ((e, k), c) in &self.components {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if !e.is_empty() {
                let names: Vec<String> =
                    e.indices().iter().map(|j| format!("e{j}")).collect();
                write!(f, "{}⊗", names.join("∧"))?;
            }
            write!(f, "({c})")?;
            if !k.is_empty() {
                let names: Vec<String> =
                    k.indices().iter().map(|j| format!("dzb{j}")).collect();
                write!(f, " {}", names.join("∧"))?;
            }
        }
        Ok(())
    }
}
