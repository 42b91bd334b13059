//! Higher derivations on finitely presented `Q[x]`-modules, compatible
//! with a higher derivation on the base ring.
//!
//! A family `D = (D_0, ..., D_n)` with `D_0 = id` over a ring family
//! `(d_0, ..., d_n)` obeys `D_k(q v) = sum_{i=0..k} d_i(q) D_{k-i}(v)`.
//! On a presented module the family is determined by generator images
//! `D_k(e_j)`, but an arbitrary choice need not descend through the
//! relations: every constructor certifies that each relation row is sent
//! to zero in the quotient, and evaluation refuses families whose
//! certificate failed.
//!
//! Conversion to and from sequences of ordinary (order-1) module
//! derivations mirrors the ring-level recursions, re-verified as maps on
//! a monomial sample at each stage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::hasse_ring::{HigherRingDerivation, OrdinaryDerivationSequence, OrdinaryRingDerivation};
use crate::poly::Poly;
use crate::presented::{Membership, ModuleElement, PresentedModule};
use crate::rat::{rat, rat_int};

/// Well-definedness certificate: either every relation row maps to zero
/// in the quotient at every order, or the first failure is recorded.
#[derive(Clone, Debug)]
pub enum WellDefStatus {
    Valid,
    Invalid(WellDefFailure),
}

impl WellDefStatus {
    pub fn is_valid(&self) -> bool {
        matches!(self, WellDefStatus::Valid)
    }
}

#[derive(Clone, Debug)]
pub struct WellDefFailure {
    /// Component at which the relation escapes the relation span.
    pub k: usize,
    /// Index of the offending presentation row.
    pub relation_row: usize,
    /// Canonical nonzero residue of the image of that relation.
    pub residue: ModuleElement,
}

impl WellDefFailure {
    pub fn render(&self) -> String {
        format!(
            "component {} sends relation row {} to nonzero class {}",
            self.k,
            self.relation_row,
            self.residue.render()
        )
    }
}

/// Validation outcome with the first counterexample found.
#[derive(Clone, Debug)]
pub struct ModuleValidationReport {
    pub pass: bool,
    pub counterexample: Option<ModuleCounterexample>,
}

#[derive(Clone, Debug)]
pub enum ModuleCounterexample {
    /// A relation row escapes the relation span.
    WellDefinedness(WellDefFailure),
    /// The compatibility rule fails on a (scalar, element) pair.
    Leibniz {
        k: usize,
        scalar: Poly,
        elem: ModuleElement,
        lhs: ModuleElement,
        rhs: ModuleElement,
    },
    /// Two representatives of one class produce different images.
    Representative {
        k: usize,
        elem: ModuleElement,
        alt: ModuleElement,
        lhs: ModuleElement,
        rhs: ModuleElement,
    },
}

impl ModuleCounterexample {
    pub fn render(&self) -> String {
        match self {
            ModuleCounterexample::WellDefinedness(f) => f.render(),
            ModuleCounterexample::Leibniz {
                k,
                scalar,
                elem,
                lhs,
                rhs,
            } => format!(
                "k={} scalar={} elem={} lhs={} rhs={}",
                k,
                scalar,
                elem.render(),
                lhs.render(),
                rhs.render()
            ),
            ModuleCounterexample::Representative {
                k,
                elem,
                alt,
                lhs,
                rhs,
            } => format!(
                "k={} representatives {} and {} map to {} and {}",
                k,
                elem.render(),
                alt.render(),
                lhs.render(),
                rhs.render()
            ),
        }
    }
}

/// An ordinary module derivation over an ordinary ring derivation with
/// value `ring_value` at `x`: determined by generator images, acting as
/// `d(sum q_j e_j) = sum q_j' * ring_value * e_j + q_j * d(e_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrdinaryModuleDerivation {
    pub ring_value: Poly,
    pub images: Vec<ModuleElement>,
}

impl OrdinaryModuleDerivation {
    pub fn new(ring_value: Poly, images: Vec<ModuleElement>) -> Self {
        OrdinaryModuleDerivation { ring_value, images }
    }

    pub fn apply(&self, module: &PresentedModule, v: &ModuleElement) -> ModuleElement {
        let gens = module.generators();
        assert_eq!(v.coords.len(), gens);
        let mut acc = ModuleElement::zero(gens);
        for (j, q) in v.coords.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            let dq = &q.derivative() * &self.ring_value;
            if !dq.is_zero() {
                acc = acc.add(&ModuleElement::unit(gens, j).scale(&dq));
            }
            acc = acc.add(&self.images[j].scale(q));
        }
        module.canonical_rep(&acc)
    }

    /// First relation row whose image escapes the relation span, if any.
    pub fn well_definedness(&self, module: &PresentedModule) -> WellDefStatus {
        let rels = module.relations();
        let gens = module.generators();
        for row in 0..rels.rows() {
            let mut total = ModuleElement::zero(gens);
            for j in 0..gens {
                let r = rels.get(row, j);
                if r.is_zero() {
                    continue;
                }
                let dr = &r.derivative() * &self.ring_value;
                if !dr.is_zero() {
                    total = total.add(&ModuleElement::unit(gens, j).scale(&dr));
                }
                total = total.add(&self.images[j].scale(r));
            }
            if let Membership::Outside { residue } = module.membership(&total) {
                return WellDefStatus::Invalid(WellDefFailure {
                    k: 1,
                    relation_row: row,
                    residue,
                });
            }
        }
        WellDefStatus::Valid
    }
}

/// A higher derivation on a presented `Q[x]`-module over a ring family on
/// `Q[x]`, stored as generator images plus the construction-time
/// well-definedness certificate.
#[derive(Clone, Debug)]
pub struct HigherModuleDerivation {
    ring: HigherRingDerivation,
    module: PresentedModule,
    /// `images[k-1][j] = D_k(e_j)`, canonical representatives.
    images: Vec<Vec<ModuleElement>>,
    status: WellDefStatus,
}

impl HigherModuleDerivation {
    pub fn new(
        ring: HigherRingDerivation,
        module: PresentedModule,
        images: Vec<Vec<ModuleElement>>,
    ) -> Result<Self, CoreError> {
        if !ring.is_poly_carrier() {
            return Err(CoreError::Carrier(
                "module derivations need a ring family on Q[x]".into(),
            ));
        }
        if images.len() != ring.order() {
            return Err(CoreError::Dimension(format!(
                "{} image rows for ring order {}",
                images.len(),
                ring.order()
            )));
        }
        let gens = module.generators();
        for (k, row) in images.iter().enumerate() {
            if row.len() != gens {
                return Err(CoreError::Dimension(format!(
                    "component {} has {} generator images, module has {} generators",
                    k + 1,
                    row.len(),
                    gens
                )));
            }
            for elem in row {
                if elem.coords.len() != gens {
                    return Err(CoreError::Dimension(format!(
                        "image coordinate length {} does not match {} generators",
                        elem.coords.len(),
                        gens
                    )));
                }
            }
        }
        let images: Vec<Vec<ModuleElement>> = images
            .iter()
            .map(|row| row.iter().map(|e| module.canonical_rep(e)).collect())
            .collect();
        let status = well_definedness(&ring, &module, &images)?;
        Ok(HigherModuleDerivation {
            ring,
            module,
            images,
            status,
        })
    }

    /// Exponential family `D_k = d^k / k!` of an ordinary module
    /// derivation; the ring family is the exponential of its base.
    pub fn make_exp(
        module: PresentedModule,
        delta: &OrdinaryModuleDerivation,
        order: usize,
    ) -> Result<Self, CoreError> {
        let ring = HigherRingDerivation::make_exp(
            &OrdinaryRingDerivation::on_poly(delta.ring_value.clone()),
            order,
        )?;
        let gens = module.generators();
        let mut images = Vec::with_capacity(order);
        let mut current: Vec<ModuleElement> =
            (0..gens).map(|j| ModuleElement::unit(gens, j)).collect();
        for k in 1..=order {
            current = current
                .iter()
                .map(|v| delta.apply(&module, v))
                .collect();
            let inv = rat(1, 1) / crate::rat::factorial(k);
            images.push(
                current
                    .iter()
                    .map(|v| v.scale(&Poly::constant(inv.clone())))
                    .collect(),
            );
        }
        HigherModuleDerivation::new(ring, module, images)
    }

    pub fn ring(&self) -> &HigherRingDerivation {
        &self.ring
    }

    pub fn module(&self) -> &PresentedModule {
        &self.module
    }

    pub fn order(&self) -> usize {
        self.ring.order()
    }

    pub fn status(&self) -> &WellDefStatus {
        &self.status
    }

    pub fn is_valid(&self) -> bool {
        self.status.is_valid()
    }

    /// Generator image `D_k(e_j)`; `k = 0` gives `e_j`.
    pub fn image(&self, k: usize, j: usize) -> ModuleElement {
        if k == 0 {
            ModuleElement::unit(self.module.generators(), j)
        } else {
            self.images[k - 1][j].clone()
        }
    }

    pub fn images(&self) -> &[Vec<ModuleElement>] {
        &self.images
    }

    /// Applies `D_k` to a representative and reduces canonically.
    /// Families with a failed certificate are refused: their action
    /// depends on the representative.
    pub fn eval(&self, k: usize, v: &ModuleElement) -> Result<ModuleElement, CoreError> {
        if k > self.order() {
            return Err(CoreError::OrderRange {
                k,
                order: self.order(),
            });
        }
        if let WellDefStatus::Invalid(f) = &self.status {
            return Err(CoreError::WellDefinedness(f.render()));
        }
        let gens = self.module.generators();
        if v.coords.len() != gens {
            return Err(CoreError::Dimension(format!(
                "element has {} coordinates, module has {} generators",
                v.coords.len(),
                gens
            )));
        }
        Ok(self.module.canonical_rep(&self.eval_raw(k, v)))
    }

    /// The defining formula without the certificate gate; used internally
    /// by the certificate computation itself and by validation.
    fn eval_raw(&self, k: usize, v: &ModuleElement) -> ModuleElement {
        let gens = self.module.generators();
        let mut acc = ModuleElement::zero(gens);
        for (j, q) in v.coords.iter().enumerate() {
            if q.is_zero() {
                continue;
            }
            for i in 0..=k {
                let coeff = self
                    .ring
                    .eval_poly(i, q)
                    .expect("order bounded by construction");
                if coeff.is_zero() {
                    continue;
                }
                acc = acc.add(&self.image(k - i, j).scale(&coeff));
            }
        }
        acc
    }

    /// Re-derives the certificate and spot-checks the compatibility rule
    /// and representative independence on seeded samples.
    pub fn validate(&self, seed: u64) -> ModuleValidationReport {
        if let WellDefStatus::Invalid(f) = &self.status {
            return ModuleValidationReport {
                pass: false,
                counterexample: Some(ModuleCounterexample::WellDefinedness(f.clone())),
            };
        }
        let gens = self.module.generators();
        let n = self.order();
        let max_rel_deg = max_relation_degree(&self.module);

        // Compatibility on monomial scalars against every generator.
        for p in 0..=(2 * max_rel_deg + 2) {
            let scalar = Poly::monomial(rat_int(1), p);
            for j in 0..gens {
                let base = ModuleElement::unit(gens, j);
                if let Some(cx) = self.leibniz_failure(&scalar, &base) {
                    return ModuleValidationReport {
                        pass: false,
                        counterexample: Some(cx),
                    };
                }
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Random scalar/element pairs.
        for _ in 0..50 {
            let scalar = random_poly(&mut rng, 4);
            let elem = random_element(&mut rng, gens, 3);
            if let Some(cx) = self.leibniz_failure(&scalar, &elem) {
                return ModuleValidationReport {
                    pass: false,
                    counterexample: Some(cx),
                };
            }
        }
        // Representative independence: shift by relation combinations.
        let rels = self.module.relations();
        if rels.rows() > 0 {
            for _ in 0..30 {
                let elem = random_element(&mut rng, gens, 3);
                let mut shift = ModuleElement::zero(gens);
                for row in 0..rels.rows() {
                    let c = random_poly(&mut rng, 2);
                    for j in 0..gens {
                        let r = rels.get(row, j);
                        if !r.is_zero() && !c.is_zero() {
                            shift.coords[j] = &shift.coords[j] + &(&c * r);
                        }
                    }
                }
                let alt = elem.add(&shift);
                for k in 0..=n {
                    let lhs = self.module.canonical_rep(&self.eval_raw(k, &elem));
                    let rhs = self.module.canonical_rep(&self.eval_raw(k, &alt));
                    if !self.module.elems_equal(&lhs, &rhs) {
                        return ModuleValidationReport {
                            pass: false,
                            counterexample: Some(ModuleCounterexample::Representative {
                                k,
                                elem,
                                alt,
                                lhs,
                                rhs,
                            }),
                        };
                    }
                }
            }
        }
        ModuleValidationReport {
            pass: true,
            counterexample: None,
        }
    }

    fn leibniz_failure(&self, scalar: &Poly, elem: &ModuleElement) -> Option<ModuleCounterexample> {
        let n = self.order();
        let scaled = elem.scale(scalar);
        for k in 0..=n {
            let lhs = self.module.canonical_rep(&self.eval_raw(k, &scaled));
            let mut rhs = ModuleElement::zero(self.module.generators());
            for i in 0..=k {
                let dq = self
                    .ring
                    .eval_poly(i, scalar)
                    .expect("order bounded by construction");
                if dq.is_zero() {
                    continue;
                }
                rhs = rhs.add(&self.eval_raw(k - i, elem).scale(&dq));
            }
            let rhs = self.module.canonical_rep(&rhs);
            if !self.module.elems_equal(&lhs, &rhs) {
                return Some(ModuleCounterexample::Leibniz {
                    k,
                    scalar: scalar.clone(),
                    elem: elem.clone(),
                    lhs,
                    rhs,
                });
            }
        }
        None
    }

    /// Converts to the sequence of ordinary module derivations via the
    /// triangular recursion, verifying each assembled stage is a genuine
    /// well-defined stage and matches the operator form on a monomial
    /// sample.
    pub fn to_ordinary_stages(&self) -> Result<Vec<OrdinaryModuleDerivation>, CoreError> {
        if !self.is_valid() {
            if let WellDefStatus::Invalid(f) = &self.status {
                return Err(CoreError::WellDefinedness(f.render()));
            }
        }
        let ring_seq = self.ring.to_ordinary_sequence()?;
        let gens = self.module.generators();
        let n = self.order();
        let mut stages: Vec<OrdinaryModuleDerivation> = Vec::with_capacity(n);
        for i in 0..n {
            let ring_value = match &ring_seq.entries[i] {
                OrdinaryRingDerivation::Poly { value } => value.clone(),
                _ => unreachable!("poly carrier enforced at construction"),
            };
            let mut images = Vec::with_capacity(gens);
            for j in 0..gens {
                let mut acc = self
                    .image(i + 1, j)
                    .scale(&Poly::int(i as i64 + 1));
                for k in 0..i {
                    let inner = self.image(i - k, j);
                    acc = acc.sub(&stages[k].apply(&self.module, &inner));
                }
                images.push(self.module.canonical_rep(&acc));
            }
            let stage = OrdinaryModuleDerivation::new(ring_value, images);
            if let WellDefStatus::Invalid(f) = stage.well_definedness(&self.module) {
                return Err(CoreError::ConversionCheck(format!(
                    "stage {} is not well defined: {}",
                    i + 1,
                    f.render()
                )));
            }
            // Operator form against the stage's derivation rule.
            let max_deg = max_relation_degree(&self.module).max(2) + 2;
            for p in 0..=max_deg {
                let scalar = Poly::monomial(rat_int(1), p);
                for j in 0..gens {
                    let v = ModuleElement::unit(gens, j).scale(&scalar);
                    let mut op = self.eval(i + 1, &v)?.scale(&Poly::int(i as i64 + 1));
                    for k in 0..i {
                        op = op.sub(&stages[k].apply(&self.module, &self.eval(i - k, &v)?));
                    }
                    let op = self.module.canonical_rep(&op);
                    let direct = stage.apply(&self.module, &v);
                    if !self.module.elems_equal(&op, &direct) {
                        return Err(CoreError::ConversionCheck(format!(
                            "stage {} disagrees with its operator form at x^{} e{}: {} vs {}",
                            i + 1,
                            p,
                            j + 1,
                            direct.render(),
                            op.render()
                        )));
                    }
                }
            }
            stages.push(stage);
        }
        Ok(stages)
    }

    /// Rebuilds the higher family from ordinary stages via the inverse
    /// recursion. Every input stage must be well defined; the rebuilt
    /// family is re-certified at construction.
    pub fn from_ordinary_stages(
        module: PresentedModule,
        stages: &[OrdinaryModuleDerivation],
    ) -> Result<Self, CoreError> {
        let n = stages.len();
        if n == 0 {
            return Err(CoreError::InvalidArgument(
                "empty ordinary-stage sequence".into(),
            ));
        }
        let gens = module.generators();
        for (i, st) in stages.iter().enumerate() {
            if st.images.len() != gens {
                return Err(CoreError::Dimension(format!(
                    "stage {} has {} generator images, module has {} generators",
                    i + 1,
                    st.images.len(),
                    gens
                )));
            }
            if let WellDefStatus::Invalid(f) = st.well_definedness(&module) {
                return Err(CoreError::ConversionCheck(format!(
                    "input stage {} is not well defined: {}",
                    i + 1,
                    f.render()
                )));
            }
        }
        let ring_seq = OrdinaryDerivationSequence {
            entries: stages
                .iter()
                .map(|s| OrdinaryRingDerivation::on_poly(s.ring_value.clone()))
                .collect(),
        };
        let ring = HigherRingDerivation::from_ordinary_sequence(&ring_seq)?;
        // D_{i+1}(e_j) = 1/(i+1) sum_{k=0..i} d_{k+1}(D_{i-k}(e_j)).
        let mut images: Vec<Vec<ModuleElement>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(gens);
            for j in 0..gens {
                let mut acc = ModuleElement::zero(gens);
                for k in 0..=i {
                    let prev = if k == i {
                        ModuleElement::unit(gens, j)
                    } else {
                        images[i - k - 1][j].clone()
                    };
                    acc = acc.add(&stages[k].apply(&module, &prev));
                }
                row.push(
                    module.canonical_rep(&acc.scale(&Poly::constant(rat(1, i as i64 + 1)))),
                );
            }
            images.push(row);
        }
        let built = HigherModuleDerivation::new(ring, module, images)?;
        if let WellDefStatus::Invalid(f) = &built.status {
            return Err(CoreError::ConversionCheck(format!(
                "rebuilt family lost well-definedness: {}",
                f.render()
            )));
        }
        Ok(built)
    }

    pub fn describe(&self) -> String {
        format!(
            "module with {} generators, {} relations; order {}",
            self.module.generators(),
            self.module.relations().rows(),
            self.order()
        )
    }
}

/// Certificate computation: every relation row must map into the relation
/// span at every component.
fn well_definedness(
    ring: &HigherRingDerivation,
    module: &PresentedModule,
    images: &[Vec<ModuleElement>],
) -> Result<WellDefStatus, CoreError> {
    let rels = module.relations();
    let gens = module.generators();
    let n = ring.order();
    for k in 1..=n {
        for row in 0..rels.rows() {
            let mut total = ModuleElement::zero(gens);
            for j in 0..gens {
                let r = rels.get(row, j);
                if r.is_zero() {
                    continue;
                }
                for i in 0..=k {
                    let coeff = ring.eval_poly(i, r)?;
                    if coeff.is_zero() {
                        continue;
                    }
                    let target = if i == k {
                        ModuleElement::unit(gens, j)
                    } else {
                        images[k - i - 1][j].clone()
                    };
                    total = total.add(&target.scale(&coeff));
                }
            }
            if let Membership::Outside { residue } = module.membership(&total) {
                return Ok(WellDefStatus::Invalid(WellDefFailure {
                    k,
                    relation_row: row,
                    residue,
                }));
            }
        }
    }
    Ok(WellDefStatus::Valid)
}

fn max_relation_degree(module: &PresentedModule) -> usize {
    let rels = module.relations();
    let mut max = 0;
    for i in 0..rels.rows() {
        for j in 0..rels.cols() {
            if let Some(d) = rels.get(i, j).degree() {
                max = max.max(d);
            }
        }
    }
    max
}

fn random_poly(rng: &mut ChaCha8Rng, max_deg: usize) -> Poly {
    let deg = rng.random_range(0..=max_deg);
    Poly::from_coeffs(
        (0..=deg)
            .map(|_| rat_int(rng.random_range(-4..=4)))
            .collect(),
    )
}

fn random_element(rng: &mut ChaCha8Rng, gens: usize, max_deg: usize) -> ModuleElement {
    ModuleElement::from_polys((0..gens).map(|_| random_poly(rng, max_deg)).collect())
}
