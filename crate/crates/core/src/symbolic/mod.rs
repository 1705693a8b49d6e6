//! Exact polynomial coefficient algebra in z_1..z_n and their conjugates
//! over complex-rational scalars.
//!
//! Every ring operation here is exact; the only rounding anywhere in this
//! module happens in [`PolyExpr::eval`] when the exact result is converted
//! to a machine complex number. That makes the algebra usable as a
//! zero-tolerance oracle for the exterior-calculus laws.

mod parse;

pub use parse::{parse_poly, ParseError};

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex64;
use num::{BigRational, ToPrimitive, Zero};
use thiserror::Error;

/// Exact complex scalar: a pair of arbitrary-precision rationals.
pub type CRat = num::complex::Complex<BigRational>;

/// Total-degree cap for products; exceeding it is an explicit error rather
/// than a silent blowup, because repeated contractions can grow degree fast.
pub const DEGREE_CAP: usize = 12;

#[derive(Debug, Error)]
pub enum SymbolicError {
    #[error("dimension mismatch: {0} vs {1} variables")]
    DimensionMismatch(usize, usize),
    #[error("product degree {0} exceeds cap {DEGREE_CAP}")]
    DegreeOverflow(usize),
    #[error("variable index {0} out of range 1..={1}")]
    AxisOutOfRange(usize, usize),
}

pub fn crat_zero() -> CRat {
    CRat::new(BigRational::zero(), BigRational::zero())
}

pub fn crat_from_i64(re: i64, im: i64) -> CRat {
    CRat::new(
        BigRational::from_integer(re.into()),
        BigRational::from_integer(im.into()),
    )
}

/// Exact rational capture of a float; requires a finite input.
pub fn rat_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// Sparse polynomial in z_1..z_n, z̄_1..z̄_n with exact complex-rational
/// coefficients. Exponent keys store the n holomorphic exponents followed by
/// the n antiholomorphic ones; zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyExpr {
    n: usize,
    terms: BTreeMap<Vec<u32>, CRat>,
}

impl PolyExpr {
    pub fn zero(n: usize) -> Self {
        PolyExpr {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: CRat) -> Self {
        let mut p = Self::zero(n);
        if !c.is_zero() {
            p.terms.insert(vec![0; 2 * n], c);
        }
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, crat_from_i64(1, 0))
    }

    /// The coordinate monomial z_j (1-based).
    pub fn var(n: usize, j: usize) -> Self {
        assert!(j >= 1 && j <= n, "variable index out of range");
        let mut exps = vec![0; 2 * n];
        exps[j - 1] = 1;
        let mut p = Self::zero(n);
        p.terms.insert(exps, crat_from_i64(1, 0));
        p
    }

    /// The conjugate coordinate monomial z̄_j (1-based).
    pub fn conj_var(n: usize, j: usize) -> Self {
        assert!(j >= 1 && j <= n, "variable index out of range");
        let mut exps = vec![0; 2 * n];
        exps[n + j - 1] = 1;
        let mut p = Self::zero(n);
        p.terms.insert(exps, crat_from_i64(1, 0));
        p
    }

    pub fn from_terms(
        n: usize,
        terms: impl IntoIterator<Item = (Vec<u32>, CRat)>,
    ) -> Self {
        let mut p = Self::zero(n);
        for (exps, c) in terms {
            assert_eq!(exps.len(), 2 * n, "exponent vector length");
            p.add_term(exps, c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &CRat)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// True when no conjugate variable appears (formally holomorphic).
    pub fn is_holomorphic(&self) -> bool {
        self.terms
            .keys()
            .all(|e| e[self.n..].iter().all(|&x| x == 0))
    }

    fn add_term(&mut self, exps: Vec<u32>, c: CRat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get().clone() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    o.insert(sum);
                }
            }
        }
    }

    fn check_dim(&self, other: &Self) -> Result<(), SymbolicError> {
        if self.n != other.n {
            return Err(SymbolicError::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SymbolicError> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        PolyExpr {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SymbolicError> {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &CRat) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        PolyExpr {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(e, a)| (e.clone(), a.clone() * c.clone()))
                .collect(),
        }
    }

    /// Exact product, capped at [`DEGREE_CAP`] total degree.
    pub fn try_mul(&self, other: &Self) -> Result<Self, SymbolicError> {
        self.check_dim(other)?;
        let da = self.total_degree();
        let db = other.total_degree();
        if !self.is_zero() && !other.is_zero() && da + db > DEGREE_CAP {
            return Err(SymbolicError::DegreeOverflow(da + db));
        }
        let mut out = Self::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                out.add_term(exps, ca.clone() * cb.clone());
            }
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.try_mul(other).expect("polynomial product")
    }

    /// Formal Wirtinger derivative ∂/∂z̄_j (1-based axis); holomorphic
    /// polynomials map to zero.
    pub fn dbar(&self, j: usize) -> Self {
        assert!(j >= 1 && j <= self.n, "axis out of range");
        let slot = self.n + j - 1;
        self.formal_derivative(slot)
    }

    /// Formal derivative ∂/∂z_j (1-based axis).
    pub fn dz(&self, j: usize) -> Self {
        assert!(j >= 1 && j <= self.n, "axis out of range");
        self.formal_derivative(j - 1)
    }

    fn formal_derivative(&self, slot: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let k = e[slot];
            if k == 0 {
                continue;
            }
            let mut exps = e.clone();
            exps[slot] = k - 1;
            let factor = CRat::new(BigRational::from_integer(k.into()), BigRational::zero());
            out.add_term(exps, c.clone() * factor);
        }
        out
    }

    /// Swap z^a z̄^b → z^b z̄^a and conjugate coefficients.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            let mut exps = vec![0; 2 * self.n];
            for j in 0..self.n {
                exps[j] = e[self.n + j];
                exps[self.n + j] = e[j];
            }
            out.add_term(exps, c.conj());
        }
        out
    }

    /// Exact evaluation at a machine-complex point, rounded to machine
    /// precision only at the very end.
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.n, "evaluation point dimension");
        let zr: Vec<CRat> = z
            .iter()
            .map(|w| CRat::new(rat_from_f64(w.re), rat_from_f64(w.im)))
            .collect();
        let mut acc = crat_zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for j in 0..self.n {
                for _ in 0..e[j] {
                    term *= zr[j].clone();
                }
                for _ in 0..e[self.n + j] {
                    term *= zr[j].conj();
                }
            }
            acc += term;
        }
        Complex64::new(
            acc.re.to_f64().unwrap_or(f64::NAN),
            acc.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

fn fmt_rat(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_monomial(n: usize, exps: &[u32]) -> String {
    let mut parts = Vec::new();
    for j in 0..n {
        match exps[j] {
            0 => {}
            1 => parts.push(format!("z{}", j + 1)),
            k => parts.push(format!("z{}^{}", j + 1, k)),
        }
    }
    for j in 0..n {
        match exps[n + j] {
            0 => {}
            1 => parts.push(format!("zb{}", j + 1)),
            k => parts.push(format!("zb{}^{}", j + 1, k)),
        }
    }
    parts.join(" ")
}

impl fmt::Display for PolyExpr {
    /// Canonical plain-text form; [`parse_poly`] round-trips it bit-exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use num::Signed;
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, c) in &self.terms {
            let mono = fmt_monomial(self.n, exps);
            // (sign, magnitude text)
            let (neg, mag) = if c.im.is_zero() {
                let mag = if c.re.abs() == BigRational::from_integer(1.into()) && !mono.is_empty()
                {
                    String::new()
                } else {
                    fmt_rat(&c.re.abs())
                };
                (c.re.is_negative(), mag)
            } else if c.re.is_zero() {
                let a = c.im.abs();
                let mag = if a == BigRational::from_integer(1.into()) {
                    "i".to_string()
                } else {
                    format!("{}i", fmt_rat(&a))
                };
                (c.im.is_negative(), mag)
            } else {
                let sign = if c.im.is_negative() { "-" } else { "+" };
                (
                    false,
                    format!("({}{}{}i)", fmt_rat(&c.re), sign, fmt_rat(&c.im.abs())),
                )
            };
            if first {
                if neg {
                    write!(f, "-")?;
                }
                first = false;
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if mag.is_empty() {
                write!(f, "{mono}")?;
            } else if mono.is_empty() {
                write!(f, "{mag}")?;
            } else {
                write!(f, "{mag} {mono}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PolyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolyExpr[n={}]({})", self.n, self)
    }
}
