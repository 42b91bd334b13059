//! Higher derivations on rings.
//!
//! A higher derivation of order `n` is a family `D = (D_0, ..., D_n)` of
//! additive maps with `D_0 = id` and the convolution rule
//! `D_k(ab) = sum_{i=0..k} D_i(a) D_{k-i}(b)`. Two carriers are supported:
//!
//! * `Q[x]`, where a family is freely determined by the generator values
//!   `D_k(x)` (any choice is valid, so validation is a self-test);
//! * a finite-dimensional algebra, where each component is a matrix and
//!   the convolution rule is checked exhaustively on basis pairs at
//!   construction. The resulting certificate travels with the value.
//!
//! Conversion to a sequence of ordinary derivations and back uses the
//! triangular recursions
//! `d_{n+1} = (n+1) D_{n+1} - sum_{k=0..n-1} d_{k+1} o D_{n-k}` and
//! `D_{i+1} = 1/(i+1) sum_{k=0..i} d_{k+1} o D_{i-k}`,
//! which are mutually inverse in characteristic zero. Both directions
//! re-verify the defining identities as maps and fail loudly on corrupted
//! input rather than returning unchecked data.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::FinAlgebra;
use crate::error::CoreError;
use crate::poly::Poly;
use crate::qmat::QMatrix;
use crate::rat::{rat, rat_int, render_rat_vec, Rat};

/// Outcome of a convolution-rule check, with the first counterexample in
/// deterministic order (component ascending, then basis pair row-major).
#[derive(Clone, Debug)]
pub struct LeibnizReport {
    pub pass: bool,
    pub counterexample: Option<LeibnizCounterexample>,
}

impl LeibnizReport {
    pub fn pass() -> Self {
        LeibnizReport {
            pass: true,
            counterexample: None,
        }
    }

    pub fn fail(cx: LeibnizCounterexample) -> Self {
        LeibnizReport {
            pass: false,
            counterexample: Some(cx),
        }
    }
}

#[derive(Clone, Debug)]
pub enum LeibnizCounterexample {
    /// Basis pair `(e_i, e_j)` at component `k` on a finite carrier.
    Fin {
        k: usize,
        i: usize,
        j: usize,
        lhs: Vec<Rat>,
        rhs: Vec<Rat>,
    },
    /// Polynomial pair at component `k`.
    Poly {
        k: usize,
        a: Poly,
        b: Poly,
        lhs: Poly,
        rhs: Poly,
    },
}

impl LeibnizCounterexample {
    pub fn render(&self) -> String {
        match self {
            LeibnizCounterexample::Fin { k, i, j, lhs, rhs } => format!(
                "k={} a=e{} b=e{} lhs={} rhs={}",
                k,
                i + 1,
                j + 1,
                render_rat_vec(lhs),
                render_rat_vec(rhs)
            ),
            LeibnizCounterexample::Poly { k, a, b, lhs, rhs } => {
                format!("k={k} a={a} b={b} lhs={lhs} rhs={rhs}")
            }
        }
    }

    /// `(k, i, j)` for finite-carrier counterexamples.
    pub fn fin_indices(&self) -> Option<(usize, usize, usize)> {
        match self {
            LeibnizCounterexample::Fin { k, i, j, .. } => Some((*k, *i, *j)),
            _ => None,
        }
    }
}

/// An ordinary derivation (order-1 Leibniz map).
#[derive(Clone, Debug, PartialEq)]
pub enum OrdinaryRingDerivation {
    /// On `Q[x]`: determined by its value at `x`, acting as `a -> a' * value`.
    Poly { value: Poly },
    /// On a finite-dimensional algebra: an explicit matrix.
    Fin { algebra: FinAlgebra, matrix: QMatrix },
}

impl OrdinaryRingDerivation {
    pub fn on_poly(value: Poly) -> Self {
        OrdinaryRingDerivation::Poly { value }
    }

    pub fn on_fin(algebra: FinAlgebra, matrix: QMatrix) -> Result<Self, CoreError> {
        if matrix.rows() != algebra.dim() || matrix.cols() != algebra.dim() {
            return Err(CoreError::Dimension(format!(
                "derivation matrix is {}x{}, algebra dimension {}",
                matrix.rows(),
                matrix.cols(),
                algebra.dim()
            )));
        }
        Ok(OrdinaryRingDerivation::Fin { algebra, matrix })
    }

    pub fn apply_poly(&self, a: &Poly) -> Result<Poly, CoreError> {
        match self {
            OrdinaryRingDerivation::Poly { value } => Ok(&a.derivative() * value),
            _ => Err(CoreError::Carrier(
                "polynomial argument on finite carrier".into(),
            )),
        }
    }

    pub fn apply_fin(&self, v: &[Rat]) -> Result<Vec<Rat>, CoreError> {
        match self {
            OrdinaryRingDerivation::Fin { matrix, .. } => Ok(matrix.apply(v)),
            _ => Err(CoreError::Carrier("vector argument on Q[x] carrier".into())),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            OrdinaryRingDerivation::Poly { value } => value.is_zero(),
            OrdinaryRingDerivation::Fin { matrix, .. } => matrix.is_zero(),
        }
    }

    /// Leibniz check. On `Q[x]` the map is a derivation by construction;
    /// on a finite carrier the rule is checked exhaustively on basis pairs.
    pub fn leibniz_report(&self) -> LeibnizReport {
        match self {
            OrdinaryRingDerivation::Poly { .. } => LeibnizReport::pass(),
            OrdinaryRingDerivation::Fin { algebra, matrix } => {
                match ordinary_leibniz_failure(algebra, matrix) {
                    None => LeibnizReport::pass(),
                    Some((i, j, lhs, rhs)) => LeibnizReport::fail(LeibnizCounterexample::Fin {
                        k: 1,
                        i,
                        j,
                        lhs,
                        rhs,
                    }),
                }
            }
        }
    }

    pub fn render(&self) -> String {
        match self {
            OrdinaryRingDerivation::Poly { value } => format!("d(x) = {value}"),
            OrdinaryRingDerivation::Fin { matrix, .. } => format!("{matrix:?}"),
        }
    }
}

/// First basis pair where `m` fails `m(ab) = m(a)b + a m(b)`, if any.
fn ordinary_leibniz_failure(
    algebra: &FinAlgebra,
    m: &QMatrix,
) -> Option<(usize, usize, Vec<Rat>, Vec<Rat>)> {
    let d = algebra.dim();
    for i in 0..d {
        for j in 0..d {
            let ei = algebra.basis_vec(i);
            let ej = algebra.basis_vec(j);
            let lhs = m.apply(&algebra.basis_product(i, j));
            let left = algebra.mul(&m.apply(&ei), &ej);
            let right = algebra.mul(&ei, &m.apply(&ej));
            let rhs: Vec<Rat> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
            if lhs != rhs {
                return Some((i, j, lhs, rhs));
            }
        }
    }
    None
}

/// A sequence `(d_1, ..., d_n)` of ordinary derivations, the conversion
/// target and source for higher derivations.
#[derive(Clone, Debug, PartialEq)]
pub struct OrdinaryDerivationSequence {
    pub entries: Vec<OrdinaryRingDerivation>,
}

impl OrdinaryDerivationSequence {
    pub fn order(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Clone, Debug)]
pub enum RingCarrier {
    /// Generator values `D_k(x)` for `k = 1..=order`; valid by freeness.
    Poly { gen_values: Vec<Poly> },
    /// Component matrices `D_1..D_n` plus the construction-time
    /// convolution certificate.
    Fin {
        algebra: FinAlgebra,
        components: Vec<QMatrix>,
        certificate: LeibnizReport,
    },
}

#[derive(Clone, Debug)]
pub struct HigherRingDerivation {
    order: usize,
    carrier: RingCarrier,
}

impl HigherRingDerivation {
    /// Higher derivation on `Q[x]` with the given generator values
    /// `D_k(x)`; the order is the number of values.
    pub fn from_gen_values(gen_values: Vec<Poly>) -> Self {
        HigherRingDerivation {
            order: gen_values.len(),
            carrier: RingCarrier::Poly { gen_values },
        }
    }

    /// Higher derivation on a finite-dimensional algebra from component
    /// matrices `D_1..D_n`. The convolution certificate is computed here
    /// and stored; an invalid family is representable (for negative
    /// testing) but carries a failing certificate.
    pub fn from_matrices(
        algebra: FinAlgebra,
        components: Vec<QMatrix>,
    ) -> Result<Self, CoreError> {
        let d = algebra.dim();
        for (k, m) in components.iter().enumerate() {
            if m.rows() != d || m.cols() != d {
                return Err(CoreError::Dimension(format!(
                    "component {} is {}x{}, algebra dimension {}",
                    k + 1,
                    m.rows(),
                    m.cols(),
                    d
                )));
            }
        }
        let order = components.len();
        let certificate = fin_leibniz_report(&algebra, &components);
        Ok(HigherRingDerivation {
            order,
            carrier: RingCarrier::Fin {
                algebra,
                components,
                certificate,
            },
        })
    }

    /// The family with `D_k = 0` for `k >= 1` on `Q[x]`.
    pub fn identity_only_poly(order: usize) -> Self {
        HigherRingDerivation::from_gen_values(vec![Poly::zero(); order])
    }

    /// The family with `D_k = 0` for `k >= 1` on a finite carrier.
    pub fn identity_only_fin(algebra: FinAlgebra, order: usize) -> Self {
        let d = algebra.dim();
        HigherRingDerivation::from_matrices(algebra, vec![QMatrix::zeros(d, d); order])
            .expect("zero components")
    }

    /// Exponential family `D_k = d^k / k!` of an ordinary derivation.
    pub fn make_exp(delta: &OrdinaryRingDerivation, order: usize) -> Result<Self, CoreError> {
        match delta {
            OrdinaryRingDerivation::Poly { .. } => {
                let mut gen_values = Vec::with_capacity(order);
                let mut cur = Poly::x();
                for k in 1..=order {
                    cur = delta.apply_poly(&cur)?;
                    gen_values.push(cur.scaled(&(rat_int(1) / crate::rat::factorial(k))));
                }
                Ok(HigherRingDerivation::from_gen_values(gen_values))
            }
            OrdinaryRingDerivation::Fin { algebra, matrix } => {
                let components = (1..=order)
                    .map(|k| matrix.pow(k).scale(&(rat_int(1) / crate::rat::factorial(k))))
                    .collect();
                HigherRingDerivation::from_matrices(algebra.clone(), components)
            }
        }
    }

    /// Rescaled family: `D'_t = D_{t/s}` when `s | t`, zero otherwise,
    /// truncated at the original order.
    pub fn make_rescaled(&self, stride: usize) -> Result<Self, CoreError> {
        if stride == 0 {
            return Err(CoreError::InvalidArgument("rescale stride must be >= 1".into()));
        }
        match &self.carrier {
            RingCarrier::Poly { gen_values } => {
                let vals = (1..=self.order)
                    .map(|t| {
                        if t % stride == 0 {
                            gen_values[t / stride - 1].clone()
                        } else {
                            Poly::zero()
                        }
                    })
                    .collect();
                Ok(HigherRingDerivation::from_gen_values(vals))
            }
            RingCarrier::Fin {
                algebra,
                components,
                ..
            } => {
                let d = algebra.dim();
                let comps = (1..=self.order)
                    .map(|t| {
                        if t % stride == 0 {
                            components[t / stride - 1].clone()
                        } else {
                            QMatrix::zeros(d, d)
                        }
                    })
                    .collect();
                HigherRingDerivation::from_matrices(algebra.clone(), comps)
            }
        }
    }

    /// Inner higher derivation of an algebra element `a`:
    /// `D_1(x) = ax - xa` and `D_m(x) = a^{m-1}(ax - xa)`.
    pub fn make_inner_higher(
        algebra: &FinAlgebra,
        a: &[Rat],
        order: usize,
    ) -> Result<Self, CoreError> {
        if a.len() != algebra.dim() {
            return Err(CoreError::Dimension(format!(
                "element has {} coordinates, algebra dimension {}",
                a.len(),
                algebra.dim()
            )));
        }
        let left = algebra.left_mul_matrix(a);
        let ad = left.sub(&algebra.right_mul_matrix(a));
        let mut components = Vec::with_capacity(order);
        let mut cur = ad;
        for k in 1..=order {
            if k > 1 {
                cur = left.mul(&cur);
            }
            components.push(cur.clone());
        }
        HigherRingDerivation::from_matrices(algebra.clone(), components)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn carrier(&self) -> &RingCarrier {
        &self.carrier
    }

    pub fn is_poly_carrier(&self) -> bool {
        matches!(self.carrier, RingCarrier::Poly { .. })
    }

    pub fn algebra(&self) -> Option<&FinAlgebra> {
        match &self.carrier {
            RingCarrier::Fin { algebra, .. } => Some(algebra),
            _ => None,
        }
    }

    /// Construction-time certificate (always passing on `Q[x]`).
    pub fn certificate(&self) -> LeibnizReport {
        match &self.carrier {
            RingCarrier::Poly { .. } => LeibnizReport::pass(),
            RingCarrier::Fin { certificate, .. } => certificate.clone(),
        }
    }

    /// Generator value `D_k(x)` on the `Q[x]` carrier; `k = 0` gives `x`.
    pub fn gen_value(&self, k: usize) -> Result<Poly, CoreError> {
        self.check_order(k)?;
        match &self.carrier {
            RingCarrier::Poly { gen_values } => Ok(if k == 0 {
                Poly::x()
            } else {
                gen_values[k - 1].clone()
            }),
            _ => Err(CoreError::Carrier("generator value on finite carrier".into())),
        }
    }

    /// Component matrix on the finite carrier; `k = 0` is the identity.
    pub fn component_matrix(&self, k: usize) -> Result<QMatrix, CoreError> {
        self.check_order(k)?;
        match &self.carrier {
            RingCarrier::Fin {
                algebra,
                components,
                ..
            } => Ok(if k == 0 {
                QMatrix::identity(algebra.dim())
            } else {
                components[k - 1].clone()
            }),
            _ => Err(CoreError::Carrier("component matrix on Q[x] carrier".into())),
        }
    }

    fn check_order(&self, k: usize) -> Result<(), CoreError> {
        if k > self.order {
            Err(CoreError::OrderRange {
                k,
                order: self.order,
            })
        } else {
            Ok(())
        }
    }

    /// Images of monomials: `table[k][m] = D_k(x^m)` for `k <= kmax`,
    /// `m <= mmax`, via the convolution recursion on `x * x^{m-1}`.
    fn monomial_table(gen_values: &[Poly], kmax: usize, mmax: usize) -> Vec<Vec<Poly>> {
        let mut table = vec![vec![Poly::zero(); mmax + 1]; kmax + 1];
        for m in 0..=mmax {
            table[0][m] = Poly::monomial(rat_int(1), m);
        }
        for k in 1..=kmax {
            for m in 1..=mmax {
                let mut acc = &Poly::x() * &table[k][m - 1];
                for j in 1..=k {
                    let vj = &gen_values[j - 1];
                    if !vj.is_zero() && !table[k - j][m - 1].is_zero() {
                        acc = &acc + &(vj * &table[k - j][m - 1]);
                    }
                }
                table[k][m] = acc;
            }
        }
        table
    }

    /// Images of the monomials `x^0 ..= x^mmax` under every component
    /// `0 ..= kmax`, computed in one shared table. Row `k`, entry `m`
    /// is the image of `x^m` under component `k`.
    pub fn eval_monomials(&self, kmax: usize, mmax: usize) -> Result<Vec<Vec<Poly>>, CoreError> {
        self.check_order(kmax)?;
        let RingCarrier::Poly { gen_values } = &self.carrier else {
            return Err(CoreError::Carrier("polynomial argument on finite carrier".into()));
        };
        Ok(Self::monomial_table(gen_values, kmax, mmax))
    }

    pub fn eval_poly(&self, k: usize, a: &Poly) -> Result<Poly, CoreError> {
        self.check_order(k)?;
        let RingCarrier::Poly { gen_values } = &self.carrier else {
            return Err(CoreError::Carrier("polynomial argument on finite carrier".into()));
        };
        if k == 0 {
            return Ok(a.clone());
        }
        let mmax = match a.degree() {
            None => return Ok(Poly::zero()),
            Some(d) => d,
        };
        let table = Self::monomial_table(gen_values, k, mmax);
        let mut acc = Poly::zero();
        for (m, c) in a.coeffs().iter().enumerate() {
            if !c.is_zero() {
                acc = &acc + &table[k][m].scaled(c);
            }
        }
        Ok(acc)
    }

    pub fn eval_fin(&self, k: usize, v: &[Rat]) -> Result<Vec<Rat>, CoreError> {
        self.check_order(k)?;
        match &self.carrier {
            RingCarrier::Fin { components, .. } => Ok(if k == 0 {
                v.to_vec()
            } else {
                components[k - 1].apply(v)
            }),
            _ => Err(CoreError::Carrier("vector argument on Q[x] carrier".into())),
        }
    }

    /// Convolution-rule check. Finite carriers are checked exhaustively on
    /// basis pairs; the `Q[x]` carrier holds by construction, so the seeded
    /// sample of monomial pairs is a self-test of the evaluator.
    pub fn validate_higher_leibniz(&self, seed: u64) -> LeibnizReport {
        match &self.carrier {
            RingCarrier::Fin {
                algebra,
                components,
                ..
            } => fin_leibniz_report(algebra, components),
            RingCarrier::Poly { gen_values } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let kmax = self.order;
                let table = Self::monomial_table(gen_values, kmax, 16);
                for _ in 0..40 {
                    let p = rng.random_range(0..=8usize);
                    let q = rng.random_range(0..=8usize);
                    for k in 0..=kmax {
                        let lhs = &table[k][p + q];
                        let mut rhs = Poly::zero();
                        for i in 0..=k {
                            rhs = &rhs + &(&table[i][p] * &table[k - i][q]);
                        }
                        if lhs != &rhs {
                            return LeibnizReport::fail(LeibnizCounterexample::Poly {
                                k,
                                a: Poly::monomial(rat_int(1), p),
                                b: Poly::monomial(rat_int(1), q),
                                lhs: lhs.clone(),
                                rhs,
                            });
                        }
                    }
                }
                LeibnizReport::pass()
            }
        }
    }

    /// Converts to the ordinary-derivation sequence via the triangular
    /// recursion, re-verifying each assembled stage as a map. A failure
    /// (impossible for a valid family; guards corrupted certificates)
    /// reports the offending stage and counterexample.
    pub fn to_ordinary_sequence(&self) -> Result<OrdinaryDerivationSequence, CoreError> {
        match &self.carrier {
            RingCarrier::Poly { gen_values } => {
                let n = self.order;
                let mut deltas: Vec<Poly> = Vec::with_capacity(n);
                for i in 0..n {
                    let mut val = gen_values[i].scaled(&rat_int(i as i64 + 1));
                    for k in 0..i {
                        val = &val - &(&gen_values[i - k - 1].derivative() * &deltas[k]);
                    }
                    deltas.push(val);
                }
                // Map-level self-check on monomials: the assembled stage
                // must equal the derivation its value at x induces.
                let deg_bound = gen_values
                    .iter()
                    .filter_map(Poly::degree)
                    .max()
                    .unwrap_or(0)
                    .max(4)
                    + 2;
                let table = Self::monomial_table(gen_values, n, deg_bound);
                for i in 0..n {
                    for m in 0..=deg_bound {
                        let mut assembled = table[i + 1][m].scaled(&rat_int(i as i64 + 1));
                        for k in 0..i {
                            assembled =
                                &assembled - &(&table[i - k][m].derivative() * &deltas[k]);
                        }
                        let induced = if m == 0 {
                            Poly::zero()
                        } else {
                            &Poly::monomial(rat_int(m as i64), m - 1) * &deltas[i]
                        };
                        if assembled != induced {
                            return Err(CoreError::ConversionCheck(format!(
                                "stage {} disagrees at x^{}: assembled {} vs induced {}",
                                i + 1,
                                m,
                                assembled,
                                induced
                            )));
                        }
                    }
                }
                Ok(OrdinaryDerivationSequence {
                    entries: deltas
                        .into_iter()
                        .map(|value| OrdinaryRingDerivation::Poly { value })
                        .collect(),
                })
            }
            RingCarrier::Fin {
                algebra,
                components,
                ..
            } => {
                let n = self.order;
                let mut deltas: Vec<QMatrix> = Vec::with_capacity(n);
                for i in 0..n {
                    let mut mat = components[i].scale(&rat_int(i as i64 + 1));
                    for k in 0..i {
                        mat = mat.sub(&deltas[k].mul(&components[i - k - 1]));
                    }
                    if let Some((bi, bj, lhs, rhs)) = ordinary_leibniz_failure(algebra, &mat) {
                        return Err(CoreError::ConversionCheck(format!(
                            "stage {} fails the Leibniz rule on (e{}, e{}): {} vs {}",
                            i + 1,
                            bi + 1,
                            bj + 1,
                            render_rat_vec(&lhs),
                            render_rat_vec(&rhs)
                        )));
                    }
                    deltas.push(mat);
                }
                Ok(OrdinaryDerivationSequence {
                    entries: deltas
                        .into_iter()
                        .map(|matrix| OrdinaryRingDerivation::Fin {
                            algebra: algebra.clone(),
                            matrix,
                        })
                        .collect(),
                })
            }
        }
    }

    /// Rebuilds the higher derivation from an ordinary sequence via the
    /// inverse recursion, checking the reconstruction identity as maps.
    pub fn from_ordinary_sequence(
        seq: &OrdinaryDerivationSequence,
    ) -> Result<HigherRingDerivation, CoreError> {
        let n = seq.entries.len();
        if n == 0 {
            return Err(CoreError::InvalidArgument(
                "empty ordinary-derivation sequence".into(),
            ));
        }
        let all_poly = seq
            .entries
            .iter()
            .all(|e| matches!(e, OrdinaryRingDerivation::Poly { .. }));
        let all_fin = seq
            .entries
            .iter()
            .all(|e| matches!(e, OrdinaryRingDerivation::Fin { .. }));
        if all_poly {
            let dvals: Vec<Poly> = seq
                .entries
                .iter()
                .map(|e| match e {
                    OrdinaryRingDerivation::Poly { value } => value.clone(),
                    _ => unreachable!(),
                })
                .collect();
            let mut gen_values: Vec<Poly> = Vec::with_capacity(n);
            for i in 0..n {
                let mut val = Poly::zero();
                for k in 0..=i {
                    let prev = if k == i {
                        Poly::x()
                    } else {
                        gen_values[i - k - 1].clone()
                    };
                    val = &val + &(&prev.derivative() * &dvals[k]);
                }
                gen_values.push(val.scaled(&rat(1, i as i64 + 1)));
            }
            let result = HigherRingDerivation::from_gen_values(gen_values.clone());
            // Reconstruction identity as maps on monomials.
            let deg_bound = gen_values
                .iter()
                .chain(dvals.iter())
                .filter_map(Poly::degree)
                .max()
                .unwrap_or(0)
                .max(4)
                + 2;
            let table = Self::monomial_table(&gen_values, n, deg_bound);
            for i in 0..n {
                for m in 0..=deg_bound {
                    let lhs = table[i + 1][m].scaled(&rat_int(i as i64 + 1));
                    let mut rhs = Poly::zero();
                    for k in 0..=i {
                        rhs = &rhs + &(&table[i - k][m].derivative() * &dvals[k]);
                    }
                    if lhs != rhs {
                        return Err(CoreError::ConversionCheck(format!(
                            "reconstruction identity fails at stage {} on x^{}: {} vs {}",
                            i + 1,
                            m,
                            lhs,
                            rhs
                        )));
                    }
                }
            }
            Ok(result)
        } else if all_fin {
            let algebra = match &seq.entries[0] {
                OrdinaryRingDerivation::Fin { algebra, .. } => algebra.clone(),
                _ => unreachable!(),
            };
            for (k, e) in seq.entries.iter().enumerate() {
                let rep = e.leibniz_report();
                if !rep.pass {
                    return Err(CoreError::ConversionCheck(format!(
                        "input entry {} fails the Leibniz rule: {}",
                        k + 1,
                        rep.counterexample.unwrap().render()
                    )));
                }
            }
            let dmats: Vec<QMatrix> = seq
                .entries
                .iter()
                .map(|e| match e {
                    OrdinaryRingDerivation::Fin { matrix, .. } => matrix.clone(),
                    _ => unreachable!(),
                })
                .collect();
            let d = algebra.dim();
            let mut comps: Vec<QMatrix> = Vec::with_capacity(n);
            for i in 0..n {
                let mut mat = QMatrix::zeros(d, d);
                for k in 0..=i {
                    let prev = if k == i {
                        QMatrix::identity(d)
                    } else {
                        comps[i - k - 1].clone()
                    };
                    mat = mat.add(&dmats[k].mul(&prev));
                }
                comps.push(mat.scale(&rat(1, i as i64 + 1)));
            }
            let result = HigherRingDerivation::from_matrices(algebra, comps)?;
            if !result.certificate().pass {
                return Err(CoreError::ConversionCheck(
                    "rebuilt family fails its convolution certificate".into(),
                ));
            }
            Ok(result)
        } else {
            Err(CoreError::Carrier(
                "mixed carriers in ordinary-derivation sequence".into(),
            ))
        }
    }

    /// Drops components above `new_order` (closure under truncation).
    pub fn truncate(&self, new_order: usize) -> Result<Self, CoreError> {
        if new_order > self.order {
            return Err(CoreError::OrderRange {
                k: new_order,
                order: self.order,
            });
        }
        match &self.carrier {
            RingCarrier::Poly { gen_values } => Ok(HigherRingDerivation::from_gen_values(
                gen_values[..new_order].to_vec(),
            )),
            RingCarrier::Fin {
                algebra,
                components,
                ..
            } => HigherRingDerivation::from_matrices(
                algebra.clone(),
                components[..new_order].to_vec(),
            ),
        }
    }

    pub fn describe(&self) -> String {
        match &self.carrier {
            RingCarrier::Poly { .. } => format!("carrier=Q[x] order={}", self.order),
            RingCarrier::Fin { algebra, .. } => {
                format!("carrier=dim-{} algebra order={}", algebra.dim(), self.order)
            }
        }
    }
}

/// Exhaustive convolution check for matrix components on basis pairs.
fn fin_leibniz_report(algebra: &FinAlgebra, components: &[QMatrix]) -> LeibnizReport {
    let d = algebra.dim();
    let n = components.len();
    let comp = |k: usize, v: &[Rat]| -> Vec<Rat> {
        if k == 0 {
            v.to_vec()
        } else {
            components[k - 1].apply(v)
        }
    };
    for k in 0..=n {
        for i in 0..d {
            for j in 0..d {
                let lhs = comp(k, &algebra.basis_product(i, j));
                let mut rhs = vec![Rat::zero(); d];
                for t in 0..=k {
                    let left = comp(t, &algebra.basis_vec(i));
                    let right = comp(k - t, &algebra.basis_vec(j));
                    let prod = algebra.mul(&left, &right);
                    for (r, p) in rhs.iter_mut().zip(prod) {
                        *r += p;
                    }
                }
                if lhs != rhs {
                    return LeibnizReport::fail(LeibnizCounterexample::Fin { k, i, j, lhs, rhs });
                }
            }
        }
    }
    LeibnizReport::pass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn x() -> Poly {
        Poly::x()
    }

    fn ddx() -> OrdinaryRingDerivation {
        OrdinaryRingDerivation::on_poly(Poly::one())
    }

    #[test]
    fn exp_of_ddx_on_cube() {
        // D_2(x^3) for the exponential of d/dx is 3x.
        let h = HigherRingDerivation::make_exp(&ddx(), 3).unwrap();
        assert_eq!(
            h.eval_poly(2, &x().pow(3)).unwrap(),
            &Poly::int(3) * &x()
        );
        // Degree bound: components strictly reduce degree.
        assert_eq!(h.eval_poly(3, &x().pow(3)).unwrap(), Poly::one());
    }

    #[test]
    fn eval_with_quadratic_generator_value() {
        // D_1(x) = x^2, D_2(x) = 0: D_2(x^2) = D_1(x)^2 = x^4.
        let h = HigherRingDerivation::from_gen_values(vec![x().pow(2), Poly::zero()]);
        assert_eq!(h.eval_poly(2, &x().pow(2)).unwrap(), x().pow(4));
    }

    #[test]
    fn eval_rejects_out_of_range() {
        let h = HigherRingDerivation::make_exp(&ddx(), 2).unwrap();
        assert_eq!(
            h.eval_poly(3, &x()).unwrap_err().code(),
            "E005"
        );
        assert_eq!(h.eval_fin(1, &[]).unwrap_err().code(), "E006");
    }

    #[test]
    fn exp_converts_to_padded_sequence() {
        // exp(d) <-> (d, 0, ..., 0), both directions, exactly.
        let h = HigherRingDerivation::make_exp(&ddx(), 4).unwrap();
        let seq = h.to_ordinary_sequence().unwrap();
        assert_eq!(seq.entries[0], OrdinaryRingDerivation::Poly { value: Poly::one() });
        for e in &seq.entries[1..] {
            assert!(e.is_zero());
        }
        let back = HigherRingDerivation::from_ordinary_sequence(&seq).unwrap();
        for k in 1..=4 {
            assert_eq!(back.gen_value(k).unwrap(), h.gen_value(k).unwrap());
        }
    }

    #[test]
    fn rescaled_exp_ordinary_sequence() {
        // Stride-2 rescaling of exp(d/dx) at order 4 converts to
        // (0, 2d, 0, 0).
        let h = HigherRingDerivation::make_exp(&ddx(), 4).unwrap();
        let r = h.make_rescaled(2).unwrap();
        assert_eq!(r.gen_value(2).unwrap(), Poly::one());
        assert_eq!(r.gen_value(4).unwrap(), Poly::zero());
        let seq = r.to_ordinary_sequence().unwrap();
        assert!(seq.entries[0].is_zero());
        assert_eq!(
            seq.entries[1],
            OrdinaryRingDerivation::Poly { value: Poly::int(2) }
        );
        assert!(seq.entries[2].is_zero());
        assert!(seq.entries[3].is_zero());
    }

    #[test]
    fn from_ordinary_pair_of_ddx() {
        // Sequence (d/dx, d/dx) at order 2: D_2(x) = 1/2, D_2(x^2) = x + 1.
        let seq = OrdinaryDerivationSequence {
            entries: vec![ddx(), ddx()],
        };
        let h = HigherRingDerivation::from_ordinary_sequence(&seq).unwrap();
        assert_eq!(h.gen_value(1).unwrap(), Poly::one());
        assert_eq!(h.gen_value(2).unwrap(), Poly::constant(rat(1, 2)));
        assert_eq!(
            h.eval_poly(2, &x().pow(2)).unwrap(),
            &x() + &Poly::one()
        );
        // Round trip back to the sequence.
        let seq2 = h.to_ordinary_sequence().unwrap();
        assert_eq!(seq, seq2);
    }

    #[test]
    fn inner_higher_on_matrix_units() {
        let m2 = FinAlgebra::matrix_algebra(2);
        let e12 = m2.basis_vec(1);
        let h = HigherRingDerivation::make_inner_higher(&m2, &e12, 4).unwrap();
        assert!(h.certificate().pass);
        // D_2(E21) = E12 (E12 E21 - E21 E12) = E12 (E11 - E22) = -E12,
        // cross-checked against the multiplication oracle.
        let e21 = m2.basis_vec(2);
        let bracket = m2.commutator(&e12, &e21);
        let oracle = m2.mul(&e12, &bracket);
        let got = h.eval_fin(2, &e21).unwrap();
        assert_eq!(got, oracle);
        let minus_e12: Vec<Rat> = m2.basis_vec(1).iter().map(|c| -c).collect();
        assert_eq!(got, minus_e12);
    }

    #[test]
    fn invalid_family_fails_at_k2_with_pair() {
        // D_1 inner by E12, D_2 = 0: the D_1 * D_1 term breaks k = 2.
        let m2 = FinAlgebra::matrix_algebra(2);
        let e12 = m2.basis_vec(1);
        let ad = m2
            .left_mul_matrix(&e12)
            .sub(&m2.right_mul_matrix(&e12));
        let h = HigherRingDerivation::from_matrices(
            m2.clone(),
            vec![ad, QMatrix::zeros(4, 4)],
        )
        .unwrap();
        let rep = h.validate_higher_leibniz(0);
        assert!(!rep.pass);
        let (k, _, _) = rep.counterexample.unwrap().fin_indices().unwrap();
        assert_eq!(k, 2);
    }

    #[test]
    fn exp_of_inner_derivation_passes() {
        let m2 = FinAlgebra::matrix_algebra(2);
        let e12 = m2.basis_vec(1);
        let ad = m2
            .left_mul_matrix(&e12)
            .sub(&m2.right_mul_matrix(&e12));
        let delta = OrdinaryRingDerivation::on_fin(m2, ad).unwrap();
        let h = HigherRingDerivation::make_exp(&delta, 3).unwrap();
        assert!(h.validate_higher_leibniz(0).pass);
    }

    #[test]
    fn truncation_preserves_validity() {
        let m2 = FinAlgebra::matrix_algebra(2);
        let a = m2.basis_vec(1);
        let h = HigherRingDerivation::make_inner_higher(&m2, &a, 4).unwrap();
        let t = h.truncate(2).unwrap();
        assert_eq!(t.order(), 2);
        assert!(t.certificate().pass);
        let p = HigherRingDerivation::from_gen_values(vec![x().pow(2), x()]);
        let tp = p.truncate(1).unwrap();
        assert_eq!(tp.gen_value(1).unwrap(), x().pow(2));
    }

    #[test]
    fn unit_annihilation_follows_from_certificate() {
        let m2 = FinAlgebra::matrix_algebra(2);
        let a: Vec<Rat> = vec![rat_int(1), rat_int(2), rat_int(0), rat_int(-1)];
        let h = HigherRingDerivation::make_inner_higher(&m2, &a, 3).unwrap();
        assert!(h.certificate().pass);
        for k in 1..=3 {
            assert_eq!(h.eval_fin(k, m2.unit()).unwrap(), m2.zero_vec());
        }
    }

    #[test]
    fn poly_round_trip_random() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..25 {
            let order = rng.random_range(1..=6);
            let gen_values: Vec<Poly> = (0..order)
                .map(|_| {
                    Poly::from_coeffs(
                        (0..=rng.random_range(0..=5usize))
                            .map(|_| rat(rng.random_range(-5..=5), rng.random_range(1..=3)))
                            .collect(),
                    )
                })
                .collect();
            let h = HigherRingDerivation::from_gen_values(gen_values.clone());
            let seq = h.to_ordinary_sequence().unwrap();
            let back = HigherRingDerivation::from_ordinary_sequence(&seq).unwrap();
            for k in 1..=order {
                assert_eq!(back.gen_value(k).unwrap(), h.gen_value(k).unwrap());
            }
        }
    }
}
