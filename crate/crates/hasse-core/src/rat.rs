//! Arbitrary-precision rational scalars.
//!
//! `Rat` is a reduced fraction with positive denominator; both invariants
//! are maintained by the backing implementation on every operation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

/// The rational `n`.
pub fn rat_int(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// The rational `num/den`. Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rat {
    assert!(den != 0, "zero denominator");
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_zero() -> Rat {
    BigRational::zero()
}

pub fn rat_one() -> Rat {
    BigRational::one()
}

/// `k!` as a rational.
pub fn factorial(k: usize) -> Rat {
    let mut acc = BigInt::one();
    for i in 2..=k {
        acc *= BigInt::from(i);
    }
    BigRational::from_integer(acc)
}

/// Canonical text form: `5`, `-5`, `3/2`, `-3/2`.
pub fn render_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders a vector of scalars as `[a, b, c]`.
pub fn render_rat_vec(v: &[Rat]) -> String {
    let parts: Vec<String> = v.iter().map(render_rat).collect();
    format!("[{}]", parts.join(", "))
}

/// True if `r` is a negative number (used by renderers for sign placement).
pub fn is_negative(r: &Rat) -> bool {
    r.is_negative()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_form_invariants() {
        let r = rat(6, -4);
        assert_eq!(r, rat(-3, 2));
        assert!(r.denom() > &BigInt::zero());
        assert_eq!(render_rat(&r), "-3/2");
        assert_eq!(render_rat(&rat(4, 2)), "2");
    }

    #[test]
    fn factorial_values() {
        assert_eq!(factorial(0), rat_int(1));
        assert_eq!(factorial(1), rat_int(1));
        assert_eq!(factorial(5), rat_int(120));
    }
}
