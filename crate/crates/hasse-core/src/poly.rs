//! Dense univariate polynomials over `Rat`.
//!
//! Coefficients are stored by ascending degree; the highest stored
//! coefficient is nonzero (the zero polynomial stores nothing). `Q[x]` is a
//! Euclidean domain, so division with remainder, exact division, and monic
//! gcd are total up to the documented panics on zero divisors.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::rat::{rat_int, render_rat, Rat};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::one())
    }

    /// The variable `x`.
    pub fn x() -> Poly {
        Poly::from_coeffs(vec![Rat::zero(), Rat::one()])
    }

    pub fn constant(c: Rat) -> Poly {
        Poly::from_coeffs(vec![c])
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(rat_int(n))
    }

    /// `c * x^deg`.
    pub fn monomial(c: Rat, deg: usize) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Rat::zero(); deg + 1];
        coeffs[deg] = c;
        Poly { coeffs }
    }

    /// Builds from ascending-degree coefficients, trimming trailing zeros.
    pub fn from_coeffs(mut coeffs: Vec<Rat>) -> Poly {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// Coefficient of `x^i` (zero beyond the stored degree).
    pub fn coeff(&self, i: usize) -> Rat {
        self.coeffs.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Degree 0 or zero polynomial.
    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// A unit of `Q[x]`, i.e. a nonzero constant.
    pub fn is_unit(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn leading(&self) -> Option<&Rat> {
        self.coeffs.last()
    }

    pub fn scaled(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some(lc) => self.scaled(&(Rat::one() / lc)),
        }
    }

    pub fn pow(&self, k: usize) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c * rat_int(i as i64))
            .collect();
        Poly::from_coeffs(coeffs)
    }

    pub fn eval_rat(&self, at: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * at + c;
        }
        acc
    }

    /// Euclidean division: `self = q * d + r` with `deg r < deg d`.
    /// Panics if `d` is zero.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let dd = d.degree().unwrap();
        let dlc = d.leading().unwrap().clone();
        let mut rem = self.clone();
        let mut q = vec![Rat::zero(); self.coeffs.len().saturating_sub(dd)];
        while let Some(rd) = rem.degree() {
            if rd < dd {
                break;
            }
            let factor = rem.leading().unwrap() / &dlc;
            let shift = rd - dd;
            q[shift] = factor.clone();
            rem = &rem - &d.mul_shifted(&factor, shift);
        }
        (Poly::from_coeffs(q), rem)
    }

    fn mul_shifted(&self, c: &Rat, shift: usize) -> Poly {
        if self.is_zero() || c.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Rat::zero(); shift];
        coeffs.extend(self.coeffs.iter().map(|a| a * c));
        Poly::from_coeffs(coeffs)
    }

    /// True if `self` divides `other` (everything divides zero; zero
    /// divides only zero).
    pub fn divides(&self, other: &Poly) -> bool {
        if other.is_zero() {
            return true;
        }
        if self.is_zero() {
            return false;
        }
        other.div_rem(self).1.is_zero()
    }

    /// Exact quotient; panics if the division leaves a remainder.
    pub fn exact_div(&self, d: &Poly) -> Poly {
        let (q, r) = self.div_rem(d);
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    /// Monic gcd; `gcd(0, 0) = 0`.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let mut x = a.clone();
        let mut y = b.clone();
        while !y.is_zero() {
            let r = x.div_rem(&y).1;
            x = y;
            y = r;
        }
        x.monic()
    }

    /// Monic lcm; zero if either argument is zero.
    pub fn lcm(a: &Poly, b: &Poly) -> Poly {
        if a.is_zero() || b.is_zero() {
            return Poly::zero();
        }
        let g = Poly::gcd(a, b);
        (a * b).exact_div(&g).monic()
    }

    /// Largest divisor of `self` whose irreducible factors all divide `f`
    /// (the `f`-primary part), together with the complementary factor that
    /// is coprime to `f`. Factoring-free: peels `gcd(·, f)` until stable.
    /// `self` must be nonzero and `f` nonconstant for a meaningful split;
    /// for constant `f` the primary part is `1`.
    pub fn primary_split(&self, f: &Poly) -> (Poly, Poly) {
        assert!(!self.is_zero(), "primary split of zero polynomial");
        let mut coprime = self.monic();
        if f.is_constant() {
            return (Poly::one(), coprime);
        }
        loop {
            let g = Poly::gcd(&coprime, f);
            if g.is_constant() {
                break;
            }
            coprime = coprime.exact_div(&g).monic();
        }
        let primary = self.monic().exact_div(&coprime).monic();
        (primary, coprime)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect();
        Poly::from_coeffs(coeffs)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect();
        Poly::from_coeffs(coeffs)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Rat::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Poly::from_coeffs(coeffs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl fmt::Display for Poly {
    /// Canonical form accepted back by the scenario parser:
    /// `3/2*x^2 - x + 1`, `-x^3 + 2`, `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for i in (0..self.coeffs.len()).rev() {
            let c = &self.coeffs[i];
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let coeff_part = if mag.is_one() && i > 0 {
                None
            } else {
                Some(render_rat(&mag))
            };
            match (coeff_part, i) {
                (Some(cp), 0) => write!(f, "{cp}")?,
                (Some(cp), 1) => write!(f, "{cp}*x")?,
                (Some(cp), _) => write!(f, "{cp}*x^{i}")?,
                (None, 1) => write!(f, "x")?,
                (None, _) => write!(f, "x^{i}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;
    use proptest::prelude::*;

    fn p(coeffs: &[i64]) -> Poly {
        Poly::from_coeffs(coeffs.iter().map(|&c| rat_int(c)).collect())
    }

    #[test]
    fn display_canonical_forms() {
        assert_eq!(p(&[]).to_string(), "0");
        assert_eq!(p(&[5]).to_string(), "5");
        assert_eq!(p(&[-5]).to_string(), "-5");
        assert_eq!(p(&[0, 1]).to_string(), "x");
        assert_eq!(p(&[0, -1]).to_string(), "-x");
        assert_eq!(p(&[1, -1, 0, 0]).to_string(), "-x + 1");
        assert_eq!(
            Poly::from_coeffs(vec![rat_int(1), rat_int(-1), rat(3, 2)]).to_string(),
            "3/2*x^2 - x + 1"
        );
        assert_eq!(p(&[-2, 0, 0, 1]).to_string(), "x^3 - 2");
    }

    #[test]
    fn div_rem_is_euclidean() {
        let a = p(&[1, 0, 3, 4]);
        let d = p(&[-1, 2]);
        let (q, r) = a.div_rem(&d);
        assert_eq!(&(&q * &d) + &r, a);
        assert!(r.degree() < d.degree());
    }

    #[test]
    fn gcd_is_monic_and_divides() {
        let a = &p(&[-1, 1]) * &p(&[0, 0, 1]);
        let b = &p(&[-1, 1]) * &p(&[2, 1]);
        let g = Poly::gcd(&a, &b);
        assert_eq!(g, p(&[-1, 1]));
        assert!(g.divides(&a) && g.divides(&b));
        assert_eq!(Poly::gcd(&Poly::zero(), &Poly::zero()), Poly::zero());
    }

    #[test]
    fn primary_split_peels_common_factors() {
        // x^2 * (x - 1) split at f = x.
        let d = &p(&[0, 0, 1]) * &p(&[-1, 1]);
        let (primary, coprime) = d.primary_split(&Poly::x());
        assert_eq!(primary, p(&[0, 0, 1]));
        assert_eq!(coprime, p(&[-1, 1]));
        // Split at f = x*(x-1) absorbs everything.
        let f = &Poly::x() * &p(&[-1, 1]);
        let (primary, coprime) = d.primary_split(&f);
        assert_eq!(primary, d.monic());
        assert_eq!(coprime, Poly::one());
    }

    #[test]
    fn derivative_leibniz() {
        let a = p(&[1, 2, 3]);
        let b = p(&[-4, 0, 0, 1]);
        let lhs = (&a * &b).derivative();
        let rhs = &(&a.derivative() * &b) + &(&a * &b.derivative());
        assert_eq!(lhs, rhs);
    }

    fn arb_poly() -> impl Strategy<Value = Poly> {
        prop::collection::vec((-6i64..=6, 1i64..=3), 0..6).prop_map(|cs| {
            Poly::from_coeffs(cs.into_iter().map(|(n, d)| rat(n, d)).collect())
        })
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_poly(), b in arb_poly(), c in arb_poly()) {
            prop_assert_eq!(&(&a + &b) * &c, &(&a * &c) + &(&b * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        }

        #[test]
        fn div_rem_props(a in arb_poly(), d in arb_poly()) {
            prop_assume!(!d.is_zero());
            let (q, r) = a.div_rem(&d);
            prop_assert_eq!(&(&q * &d) + &r, a);
            prop_assert!(r.is_zero() || r.degree().unwrap() < d.degree().unwrap());
        }

        #[test]
        fn gcd_props(a in arb_poly(), b in arb_poly()) {
            let g = Poly::gcd(&a, &b);
            prop_assert!(g.divides(&a));
            prop_assert!(g.divides(&b));
            if !a.is_zero() || !b.is_zero() {
                prop_assert!(g.leading().unwrap().is_one());
            }
        }
    }
}
