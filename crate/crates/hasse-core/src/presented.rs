//! Finitely presented `Q[x]`-modules.
//!
//! A module is `Q[x]^g` modulo the row span of a relations matrix. Smith
//! normal form is computed once at construction; membership in the row
//! span, linear solving, and canonical coset representatives all reduce to
//! divisibility against the diagonal in the transformed coordinates.

use crate::error::CoreError;
use crate::poly::Poly;
use crate::polymat::PolyMatrix;
use crate::snf::{snf, Snf};

/// Element of `Q[x]^g`, viewed as a coset representative when attached to
/// a module. Plain data; the owning module interprets it.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ModuleElement {
    pub coords: Vec<Poly>,
}

impl ModuleElement {
    pub fn zero(generators: usize) -> ModuleElement {
        ModuleElement {
            coords: vec![Poly::zero(); generators],
        }
    }

    /// The `j`-th standard generator.
    pub fn unit(generators: usize, j: usize) -> ModuleElement {
        let mut e = ModuleElement::zero(generators);
        e.coords[j] = Poly::one();
        e
    }

    pub fn from_polys(coords: Vec<Poly>) -> ModuleElement {
        ModuleElement { coords }
    }

    pub fn add(&self, rhs: &ModuleElement) -> ModuleElement {
        assert_eq!(self.coords.len(), rhs.coords.len());
        ModuleElement {
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &ModuleElement) -> ModuleElement {
        assert_eq!(self.coords.len(), rhs.coords.len());
        ModuleElement {
            coords: self
                .coords
                .iter()
                .zip(&rhs.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn neg(&self) -> ModuleElement {
        ModuleElement {
            coords: self.coords.iter().map(|a| -a).collect(),
        }
    }

    /// Ring action: multiply every coordinate by `a`.
    pub fn scale(&self, a: &Poly) -> ModuleElement {
        ModuleElement {
            coords: self.coords.iter().map(|c| a * c).collect(),
        }
    }

    pub fn is_zero_vector(&self) -> bool {
        self.coords.iter().all(Poly::is_zero)
    }

    pub fn render(&self) -> String {
        let parts: Vec<String> = self.coords.iter().map(|p| p.to_string()).collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Result of a row-span membership query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    /// `v = combination * relations`.
    Inside { combination: Vec<Poly> },
    /// Canonical nonzero coset representative of `v`.
    Outside { residue: ModuleElement },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

#[derive(Clone, Debug)]
pub struct PresentedModule {
    generators: usize,
    relations: PolyMatrix,
    snf: Snf,
}

impl PresentedModule {
    pub fn new(generators: usize, relations: PolyMatrix) -> Result<Self, CoreError> {
        if relations.cols() != generators {
            return Err(CoreError::Dimension(format!(
                "relations have {} columns for {} generators",
                relations.cols(),
                generators
            )));
        }
        let snf = snf(&relations);
        Ok(PresentedModule {
            generators,
            relations,
            snf,
        })
    }

    /// Free module of the given rank (no relations).
    pub fn free(rank: usize) -> Self {
        PresentedModule::new(rank, PolyMatrix::empty(rank)).expect("free module")
    }

    /// Cyclic module `Q[x]/(p)`.
    pub fn cyclic(p: &Poly) -> Self {
        PresentedModule::new(1, PolyMatrix::from_rows(vec![vec![p.clone()]])).expect("cyclic module")
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn relations(&self) -> &PolyMatrix {
        &self.relations
    }

    pub fn snf(&self) -> &Snf {
        &self.snf
    }

    /// Full diagonal of the relations SNF (units, proper torsion, zeros).
    pub fn diagonal(&self) -> &[Poly] {
        &self.snf.diag
    }

    /// Nonunit, nonzero invariant factors, in chain order.
    pub fn invariant_factors(&self) -> Vec<Poly> {
        self.snf
            .diag
            .iter()
            .filter(|d| !d.is_zero() && !d.is_unit())
            .cloned()
            .collect()
    }

    /// Rank of the free part.
    pub fn free_rank(&self) -> usize {
        self.generators - self.snf.rank()
    }

    /// Dimension over `Q` when finite (no free part).
    pub fn qdim(&self) -> Option<usize> {
        if self.free_rank() > 0 {
            return None;
        }
        Some(
            self.invariant_factors()
                .iter()
                .map(|d| d.degree().unwrap())
                .sum(),
        )
    }

    /// Coordinates of `v` in the diagonal basis: `v * V`.
    fn to_diag_coords(&self, v: &ModuleElement) -> Vec<Poly> {
        PolyMatrix::row_vec_mul(&v.coords, &self.snf.v)
    }

    /// Canonical coset representative: reduce each diagonal coordinate
    /// modulo its invariant factor and map back.
    pub fn canonical_rep(&self, v: &ModuleElement) -> ModuleElement {
        assert_eq!(v.coords.len(), self.generators, "element size mismatch");
        let mut c = self.to_diag_coords(v);
        for (t, d) in self.snf.diag.iter().enumerate() {
            if !d.is_zero() {
                c[t] = c[t].div_rem(d).1;
            }
        }
        ModuleElement {
            coords: PolyMatrix::row_vec_mul(&c, &self.snf.v_inv),
        }
    }

    pub fn is_zero_elem(&self, v: &ModuleElement) -> bool {
        self.canonical_rep(v).is_zero_vector()
    }

    pub fn elems_equal(&self, a: &ModuleElement, b: &ModuleElement) -> bool {
        self.is_zero_elem(&a.sub(b))
    }

    /// Does `v` lie in the row span of the relations? Positive answers
    /// carry the combination, negative ones the canonical residue.
    pub fn membership(&self, v: &ModuleElement) -> Membership {
        assert_eq!(v.coords.len(), self.generators, "element size mismatch");
        match solve_with_snf(&self.relations, &self.snf, &v.coords) {
            Some(combination) => Membership::Inside { combination },
            None => Membership::Outside {
                residue: self.canonical_rep(v),
            },
        }
    }

    /// Generator of the annihilator ideal `{ a : a * v = 0 in M }`.
    /// Zero when `v` has a free component, `1` when `v = 0` in `M`.
    pub fn annihilator(&self, v: &ModuleElement) -> Poly {
        let c = self.to_diag_coords(v);
        let mut ann = Poly::one();
        for (j, cj) in c.iter().enumerate() {
            let d = self.snf.diag.get(j).cloned().unwrap_or_else(Poly::zero);
            if d.is_zero() {
                if !cj.is_zero() {
                    return Poly::zero();
                }
            } else if !cj.is_zero() {
                let g = Poly::gcd(&d, cj);
                ann = Poly::lcm(&ann, &d.exact_div(&g));
            }
        }
        ann
    }
}

/// Solves the row-vector system `u * m = b` over `Q[x]` via the SNF of
/// `m`. Returns `None` when no solution exists.
pub fn solve_linear(m: &PolyMatrix, b: &[Poly]) -> Option<Vec<Poly>> {
    let s = snf(m);
    solve_with_snf(m, &s, b)
}

fn solve_with_snf(m: &PolyMatrix, s: &Snf, b: &[Poly]) -> Option<Vec<Poly>> {
    assert_eq!(b.len(), m.cols(), "rhs length mismatch");
    let r = m.rows();
    let c = m.cols();
    // With u = w * U: u * m = b  <=>  w * diag = b * V, solved coordinatewise.
    let bv = PolyMatrix::row_vec_mul(b, &s.v);
    let mut w = vec![Poly::zero(); r];
    for j in 0..c {
        let d = s.diag.get(j).cloned().unwrap_or_else(Poly::zero);
        if d.is_zero() {
            if !bv[j].is_zero() {
                return None;
            }
        } else {
            // d nonzero implies j < min(r, c).
            let (q, rem) = bv[j].div_rem(&d);
            if !rem.is_zero() {
                return None;
            }
            w[j] = q;
        }
    }
    Some(PolyMatrix::row_vec_mul(&w, &s.u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::x()
    }

    fn elem(coords: Vec<Poly>) -> ModuleElement {
        ModuleElement::from_polys(coords)
    }

    #[test]
    fn membership_cyclic_inside() {
        // v = x^3 in coker([[x^2]]): inside, witness x.
        let m = PresentedModule::cyclic(&x().pow(2));
        match m.membership(&elem(vec![x().pow(3)])) {
            Membership::Inside { combination } => {
                assert_eq!(combination, vec![x()]);
            }
            other => panic!("expected inside, got {other:?}"),
        }
    }

    #[test]
    fn membership_cyclic_outside_residue() {
        let m = PresentedModule::cyclic(&x().pow(2));
        match m.membership(&elem(vec![&x() + &Poly::one()])) {
            Membership::Outside { residue } => {
                assert_eq!(residue.coords, vec![&x() + &Poly::one()]);
            }
            other => panic!("expected outside, got {other:?}"),
        }
    }

    #[test]
    fn membership_scaled_row() {
        // coker([[x, 1]]), v = ((1+x)x, 1+x): inside with witness 1+x.
        let m = PresentedModule::new(2, PolyMatrix::from_rows(vec![vec![x(), Poly::one()]])).unwrap();
        let w = &Poly::one() + &x();
        match m.membership(&elem(vec![&w * &x(), w.clone()])) {
            Membership::Inside { combination } => assert_eq!(combination, vec![w]),
            other => panic!("expected inside, got {other:?}"),
        }
    }

    #[test]
    fn solve_linear_examples() {
        // u * [[x, 1]] = (x^2 + x, x + 1) has solution u = (x + 1).
        let m = PolyMatrix::from_rows(vec![vec![x(), Poly::one()]]);
        let b = vec![&x().pow(2) + &x(), &x() + &Poly::one()];
        assert_eq!(solve_linear(&m, &b), Some(vec![&x() + &Poly::one()]));
        // Inconsistent system.
        let b_bad = vec![x().pow(2), Poly::one()];
        assert_eq!(solve_linear(&m, &b_bad), None);
    }

    #[test]
    fn solve_zero_rows() {
        let m = PolyMatrix::empty(2);
        assert_eq!(
            solve_linear(&m, &[Poly::zero(), Poly::zero()]),
            Some(Vec::new())
        );
        assert_eq!(solve_linear(&m, &[Poly::one(), Poly::zero()]), None);
    }

    #[test]
    fn canonical_rep_is_idempotent_and_additive() {
        let rel = &x().pow(2) * &(&x() - &Poly::one());
        let m = PresentedModule::new(
            2,
            PolyMatrix::from_rows(vec![vec![rel, Poly::zero()], vec![Poly::zero(), x().pow(2)]]),
        )
        .unwrap();
        let v = elem(vec![x().pow(5), &x().pow(3) + &Poly::int(7)]);
        let c = m.canonical_rep(&v);
        assert_eq!(m.canonical_rep(&c), c);
        assert!(m.elems_equal(&v, &c));
        // Representative of v + relation row equals representative of v.
        let shifted = v.add(&elem(m.relations().row(0).to_vec()));
        assert_eq!(m.canonical_rep(&shifted), c);
    }

    #[test]
    fn annihilator_values() {
        // M = Q[x]/(x^2(x-1)): ann(e) = x^2(x-1), ann((x-1)e) = x^2.
        let rel = &x().pow(2) * &(&x() - &Poly::one());
        let m = PresentedModule::cyclic(&rel);
        assert_eq!(m.annihilator(&ModuleElement::unit(1, 0)), rel.monic());
        let t = elem(vec![&x() - &Poly::one()]);
        assert_eq!(m.annihilator(&t), x().pow(2));
        // Free element has zero annihilator; zero element has unit annihilator.
        let f = PresentedModule::free(1);
        assert_eq!(f.annihilator(&ModuleElement::unit(1, 0)), Poly::zero());
        assert_eq!(m.annihilator(&elem(vec![rel.clone()])), Poly::one());
    }

    #[test]
    fn qdim_and_ranks() {
        let rel = &x().pow(2) * &(&x() - &Poly::one());
        let m = PresentedModule::new(
            2,
            PolyMatrix::from_rows(vec![vec![rel, Poly::zero()]]),
        )
        .unwrap();
        assert_eq!(m.free_rank(), 1);
        assert_eq!(m.qdim(), None);
        let c = PresentedModule::cyclic(&x().pow(3));
        assert_eq!(c.qdim(), Some(3));
        assert_eq!(c.free_rank(), 0);
    }
}
