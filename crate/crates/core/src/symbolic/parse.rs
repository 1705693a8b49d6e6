//! Plain-text polynomial syntax: terms like `(3/2+1/2i) z1^2 zb2` joined by
//! `+`/`-`, with `zbK` denoting the conjugate variable. The printer output of
//! [`PolyExpr`] parses back to an identical value.

use num::{BigInt, BigRational, Zero};

use super::{CRat, PolyExpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at line {line}, column {col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.bump();
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn integer(&mut self) -> Result<BigInt, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.bump();
        }
        if self.pos == start {
            return self.err("expected digit");
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        Ok(text.parse().unwrap())
    }

    fn rational(&mut self) -> Result<BigRational, ParseError> {
        let numer = self.integer()?;
        if self.eat(b'/') {
            let denom = self.integer()?;
            if denom.is_zero() {
                return self.err("zero denominator");
            }
            Ok(BigRational::new(numer, denom))
        } else {
            Ok(BigRational::from_integer(numer))
        }
    }
}

/// Parse one coefficient. Accepted forms: `3`, `3/2`, `2i`, `i`,
/// `(3/2+1/2i)`, `(1-2i)`, `(2i)`, `(3)`.
fn coefficient(cur: &mut Cursor) -> Result<Option<CRat>, ParseError> {
    match cur.peek() {
        Some(b'(') => {
            cur.bump();
            cur.skip_ws();
            let mut neg = false;
            if cur.eat(b'-') {
                neg = true;
            } else {
                cur.eat(b'+');
            }
            let first = cur.rational()?;
            let first = if neg { -first } else { first };
            cur.skip_ws();
            let c = if cur.eat(b'i') {
                CRat::new(BigRational::zero(), first)
            } else if matches!(cur.peek(), Some(b'+' | b'-')) {
                let neg2 = cur.bump() == Some(b'-');
                cur.skip_ws();
                let second = cur.rational()?;
                let second = if neg2 { -second } else { second };
                if !cur.eat(b'i') {
                    return cur.err("expected 'i' after imaginary part");
                }
                CRat::new(first, second)
            } else {
                CRat::new(first, BigRational::zero())
            };
            cur.skip_ws();
            if !cur.eat(b')') {
                return cur.err("expected ')'");
            }
            Ok(Some(c))
        }
        Some(b'0'..=b'9') => {
            let r = cur.rational()?;
            if cur.eat(b'i') {
                Ok(Some(CRat::new(BigRational::zero(), r)))
            } else {
                Ok(Some(CRat::new(r, BigRational::zero())))
            }
        }
        // bare `i` but not a variable name like `i...` (we have none)
        Some(b'i') => {
            cur.bump();
            Ok(Some(CRat::new(
                BigRational::zero(),
                BigRational::from_integer(1.into()),
            )))
        }
        _ => Ok(None),
    }
}

/// Parse one variable factor `zK[^E]` or `zbK[^E]`; returns (slot, exponent)
/// with slot already resolved against n.
fn factor(cur: &mut Cursor, n: usize) -> Result<Option<(usize, u32)>, ParseError> {
    if cur.peek() != Some(b'z') {
        return Ok(None);
    }
    cur.bump();
    let conj = cur.eat(b'b');
    let idx = cur.integer()?;
    let idx: usize = match idx.try_into() {
        Ok(v) => v,
        Err(_) => return cur.err("variable index too large"),
    };
    if idx < 1 || idx > n {
        return cur.err(format!("variable index {idx} out of range 1..={n}"));
    }
    let exp: u32 = if cur.eat(b'^') {
        let e = cur.integer()?;
        match e.try_into() {
            Ok(v) => v,
            Err(_) => return cur.err("exponent too large"),
        }
    } else {
        1
    };
    let slot = if conj { n + idx - 1 } else { idx - 1 };
    Ok(Some((slot, exp)))
}

/// Parse a polynomial in the plain-text syntax over n variables.
pub fn parse_poly(text: &str, n: usize) -> Result<PolyExpr, ParseError> {
    let mut cur = Cursor::new(text);
    let mut poly = PolyExpr::zero(n);
    cur.skip_ws();
    if cur.peek().is_none() {
        return cur.err("empty polynomial");
    }
    let mut first = true;
    loop {
        cur.skip_ws();
        let mut neg = false;
        match cur.peek() {
            Some(b'+') => {
                cur.bump();
            }
            Some(b'-') => {
                cur.bump();
                neg = true;
            }
            None if !first => break,
            _ if first => {}
            _ => return cur.err("expected '+' or '-'"),
        }
        cur.skip_ws();
        let mut coeff = match coefficient(&mut cur)? {
            Some(c) => c,
            None => CRat::new(BigRational::from_integer(1.into()), BigRational::zero()),
        };
        let mut exps = vec![0u32; 2 * n];
        let mut saw_factor = false;
        loop {
            cur.skip_ws();
            match factor(&mut cur, n)? {
                Some((slot, e)) => {
                    exps[slot] += e;
                    saw_factor = true;
                }
                None => break,
            }
        }
        if !saw_factor && coeff == CRat::new(BigRational::from_integer(1.into()), BigRational::zero())
        {
            // a bare sign with nothing after it, unless the text was literally "1"
            match cur.peek() {
                Some(b'0'..=b'9') | Some(b'(') | Some(b'i') | None | Some(b'+') | Some(b'-') => {}
                _ => return cur.err("expected coefficient or variable"),
            }
        }
        if neg {
            coeff = -coeff;
        }
        if !coeff.is_zero() {
            let term = PolyExpr::from_terms(n, [(exps, coeff)]);
            poly = poly.add(&term).unwrap();
        }
        first = false;
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some(b'+' | b'-') => continue,
            _ => return cur.err("unexpected character"),
        }
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::super::crat_from_i64;
    use super::*;

    #[test]
    fn parses_doc_example() {
        let p = parse_poly("(3/2+1/2i) z1^2 zb2", 2).unwrap();
        let mut exps = vec![0u32; 4];
        exps[0] = 2;
        exps[3] = 1;
        let c = CRat::new(
            BigRational::new(3.into(), 2.into()),
            BigRational::new(1.into(), 2.into()),
        );
        assert_eq!(p, PolyExpr::from_terms(2, [(exps, c)]));
    }

    #[test]
    fn parses_signs_and_units() {
        let p = parse_poly("z1 - z2 + i z1 z2 - 2", 2).unwrap();
        let q = PolyExpr::var(2, 1)
            .sub(&PolyExpr::var(2, 2))
            .unwrap()
            .add(
                &PolyExpr::var(2, 1)
                    .mul(&PolyExpr::var(2, 2))
                    .scale(&crat_from_i64(0, 1)),
            )
            .unwrap()
            .sub(&PolyExpr::constant(2, crat_from_i64(2, 0)))
            .unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn zero_literal() {
        let p = parse_poly("0", 2).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn error_carries_line_and_column() {
        let err = parse_poly("z1 +\n z9", 2).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.col, 4);
        assert!(err.msg.contains("out of range"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_poly("z1 * z2", 2).is_err());
        assert!(parse_poly("", 2).is_err());
        assert!(parse_poly("zb", 2).is_err());
        assert!(parse_poly("1/0", 2).is_err());
    }

    #[test]
    fn repeated_factors_accumulate() {
        let p = parse_poly("z1 z1", 2).unwrap();
        assert_eq!(p, PolyExpr::var(2, 1).mul(&PolyExpr::var(2, 1)));
    }
}
