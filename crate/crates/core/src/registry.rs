//! Built-in test functions, each vanishing at α = 0.

use std::sync::Arc;

use num::complex::Complex64;
use num::Zero;

use crate::gleason::{Evaluator, HolomorphicInput};
use crate::symbolic::parse_poly;

pub const REGISTRY_NAMES: [&str; 5] = ["z1", "zero", "bilinear", "expsum", "sinpoly"];

/// Look up a registry function for dimension n; `None` when the name is
/// unknown or needs more variables than n provides.
pub fn builtin(name: &str, n: usize) -> Option<HolomorphicInput> {
    let alpha = vec![Complex64::zero(); n];
    let eval = match name {
        "z1" => Evaluator::Poly(parse_poly("z1", n).ok()?),
        "zero" => Evaluator::Poly(parse_poly("0", n).ok()?),
        "bilinear" => {
            if n < 2 {
                return None;
            }
            Evaluator::Poly(parse_poly("z1 z2 + z2^2", n).ok()?)
        }
        "expsum" => Evaluator::Fn(Arc::new(|z: &[Complex64]| {
            z.iter().sum::<Complex64>().exp() - 1.0
        })),
        "sinpoly" => {
            if n < 2 {
                return None;
            }
            Evaluator::Fn(Arc::new(|z: &[Complex64]| z[0].sin() + z[1] * z[0].exp()))
        }
        _ => return None,
    };
    Some(HolomorphicInput::new(eval, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_registry_functions_vanish_at_zero() {
        for name in REGISTRY_NAMES {
            for n in 1..=3 {
                if let Some(g) = builtin(name, n) {
                    let v = g.value(&vec![Complex64::zero(); n]);
                    assert!(v.norm() < 1e-12, "{name} at n={n}: {v}");
                }
            }
        }
        assert!(builtin("bilinear", 1).is_none());
        assert!(builtin("nope", 2).is_none());
    }
}
