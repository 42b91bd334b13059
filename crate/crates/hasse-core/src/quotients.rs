//! The module of quotients of a presented `Q[x]`-module at a principal
//! filter: fractions over the torsion-free quotient, the canonical map
//! with its kernel certificate, the triangular lifting of higher
//! derivations to the localization, and uniqueness checks.
//!
//! `Q(M)` is realized as pairs `(m, p)` denoting `m / f^p` with `m` a
//! class in `M/M_tau`. Because `M/M_tau` is `f`-torsion-free, two pairs
//! are equal exactly when cross-multiplying by `f`-powers matches, with
//! no extra power needed; this is itself a tested invariant.
//!
//! The lift obeys, for `q = m / f^p`,
//! `L_k(q) = [Dbar_k(m) - sum_{i=1..k} d_i(f^p) * L_{k-i}(q)] / f^p`,
//! a triangular recursion in `k` that starts from the pushed-down family
//! `Dbar` on `M/M_tau` (whose well-definedness is exactly the
//! higher-differential property of the torsion theory, re-certified at
//! construction).

use crate::error::CoreError;
use crate::hasse_module::{HigherModuleDerivation, WellDefStatus};
use crate::hasse_ring::HigherRingDerivation;
use crate::poly::Poly;
use crate::presented::{ModuleElement, PresentedModule};
use crate::torsion::{
    element_is_torsion, filter_delta_invariant, torsion_submodule, GabrielFilterSpec, IdealSpec,
    TorsionDecomposition,
};

/// A fraction `numerator / f^exponent` over the torsion-free quotient.
#[derive(Clone, Debug)]
pub struct LocalizedElement {
    pub numerator: ModuleElement,
    pub exponent: usize,
}

impl LocalizedElement {
    pub fn render(&self, f: &Poly) -> String {
        if self.exponent == 0 {
            self.numerator.render()
        } else {
            format!("{} / ({})^{}", self.numerator.render(), f, self.exponent)
        }
    }
}

/// The localization of `M` at the powers of `f`, realized over the
/// torsion-free quotient of the decomposition.
#[derive(Clone, Debug)]
pub struct QuotientModule {
    base: TorsionDecomposition,
}

impl QuotientModule {
    pub fn build(module: &PresentedModule, filter: &GabrielFilterSpec) -> QuotientModule {
        QuotientModule {
            base: torsion_submodule(module, filter),
        }
    }

    pub fn base(&self) -> &TorsionDecomposition {
        &self.base
    }

    pub fn filter(&self) -> &GabrielFilterSpec {
        self.base.filter()
    }

    pub fn f(&self) -> &Poly {
        self.base.filter().f()
    }

    /// The presentation carrying the numerators.
    pub fn carrier(&self) -> &PresentedModule {
        self.base.quotient()
    }

    /// Whether the whole localization is the zero module.
    pub fn is_zero_module(&self) -> bool {
        self.carrier().qdim() == Some(0)
    }

    pub fn zero(&self) -> LocalizedElement {
        LocalizedElement {
            numerator: ModuleElement::zero(self.carrier().generators()),
            exponent: 0,
        }
    }

    /// Embeds a class of the carrier at denominator `f^0`.
    pub fn from_class(&self, m: &ModuleElement) -> LocalizedElement {
        LocalizedElement {
            numerator: self.carrier().canonical_rep(m),
            exponent: 0,
        }
    }

    /// The canonical map from the parent: project the representative and
    /// embed at denominator zero.
    pub fn phi(&self, m: &ModuleElement) -> LocalizedElement {
        self.from_class(m)
    }

    pub fn is_zero_elem(&self, a: &LocalizedElement) -> bool {
        self.carrier().is_zero_elem(&a.numerator)
    }

    /// `(m, k) = (m', k')` iff `f^{k'} m = f^k m'` in the carrier; no
    /// extra power is needed because the carrier is `f`-torsion-free.
    pub fn eq(&self, a: &LocalizedElement, b: &LocalizedElement) -> bool {
        let fa = self.f().pow(b.exponent);
        let fb = self.f().pow(a.exponent);
        self.carrier()
            .elems_equal(&a.numerator.scale(&fa), &b.numerator.scale(&fb))
    }

    pub fn add(&self, a: &LocalizedElement, b: &LocalizedElement) -> LocalizedElement {
        let e = a.exponent.max(b.exponent);
        let na = a.numerator.scale(&self.f().pow(e - a.exponent));
        let nb = b.numerator.scale(&self.f().pow(e - b.exponent));
        LocalizedElement {
            numerator: self.carrier().canonical_rep(&na.add(&nb)),
            exponent: e,
        }
    }

    pub fn neg(&self, a: &LocalizedElement) -> LocalizedElement {
        LocalizedElement {
            numerator: a.numerator.neg(),
            exponent: a.exponent,
        }
    }

    pub fn sub(&self, a: &LocalizedElement, b: &LocalizedElement) -> LocalizedElement {
        self.add(a, &self.neg(b))
    }

    pub fn scale_poly(&self, a: &LocalizedElement, p: &Poly) -> LocalizedElement {
        LocalizedElement {
            numerator: self.carrier().canonical_rep(&a.numerator.scale(p)),
            exponent: a.exponent,
        }
    }

    /// Division by `f^t`: legal everywhere in the localization.
    pub fn divide_by_f_power(&self, a: &LocalizedElement, t: usize) -> LocalizedElement {
        LocalizedElement {
            numerator: a.numerator.clone(),
            exponent: a.exponent + t,
        }
    }

    /// Certifies `ker(phi) = M_tau`, both inclusions: every torsion
    /// generator maps to the zero class, and every carrier relation row,
    /// read in the parent, is torsion.
    pub fn kernel_matches_torsion(&self) -> Result<(), CoreError> {
        for (j, t) in self.base.torsion_generators().iter().enumerate() {
            if !self.is_zero_elem(&self.phi(t)) {
                return Err(CoreError::WellDefinedness(format!(
                    "torsion generator {} survives the canonical map",
                    j + 1
                )));
            }
        }
        let rels = self.carrier().relations();
        let gens = self.carrier().generators();
        for row in 0..rels.rows() {
            let elem = ModuleElement::from_polys(
                (0..gens).map(|l| rels.get(row, l).clone()).collect(),
            );
            if !element_is_torsion(self.base.parent(), self.filter(), &elem) {
                return Err(CoreError::WellDefinedness(format!(
                    "kernel row {} of the canonical map is not torsion",
                    row + 1
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of validating an extension or comparing two of them.
#[derive(Clone, Debug)]
pub struct ExtensionReport {
    pub pass: bool,
    pub checked: usize,
    pub witness: Option<String>,
}

impl ExtensionReport {
    fn passing(checked: usize) -> Self {
        ExtensionReport {
            pass: true,
            checked,
            witness: None,
        }
    }

    fn failing(checked: usize, witness: String) -> Self {
        ExtensionReport {
            pass: false,
            checked,
            witness: Some(witness),
        }
    }
}

/// A higher derivation lifted to the localization, together with the
/// pushed-down family it extends and the recorded invariance witness.
#[derive(Clone, Debug)]
pub struct ExtendedHigherDerivation {
    base: HigherModuleDerivation,
    quotient: QuotientModule,
    dbar: HigherModuleDerivation,
    invariance_witness: IdealSpec,
}

/// Lifts a validated family to the localization. Preconditions, each its
/// own refusal: the family must carry a passing certificate; every
/// component must keep the torsion submodule inside itself; the filter
/// must have an invariance witness. The pushed-down family on the
/// carrier is re-certified rather than trusted.
pub fn extend_derivation(
    deriv: &HigherModuleDerivation,
    quotient: &QuotientModule,
) -> Result<ExtendedHigherDerivation, CoreError> {
    extend_derivation_impl(deriv, quotient, None)
}

/// Same construction, but records a caller-supplied invariance witness
/// after verifying it qualifies: the ideal must lie in the filter and
/// every component image of its generator must stay inside the target.
/// The lift values cannot depend on which witness is recorded; that
/// independence is what the uniqueness comparison exercises.
pub fn extend_derivation_with_witness(
    deriv: &HigherModuleDerivation,
    quotient: &QuotientModule,
    witness: &IdealSpec,
) -> Result<ExtendedHigherDerivation, CoreError> {
    if !quotient.filter().contains(witness) {
        return Err(CoreError::NotInFilter(format!(
            "{} does not contain a power of {}",
            witness.render(),
            quotient.f()
        )));
    }
    let target = quotient.filter().power_ideal(1);
    for i in 0..=deriv.order() {
        let image = deriv.ring().eval_poly(i, witness.gen())?;
        if !target.gen().divides(&image) {
            return Err(CoreError::InvalidArgument(format!(
                "{} is not an invariance witness: component {} leaves {}",
                witness.render(),
                i,
                target.render()
            )));
        }
    }
    extend_derivation_impl(deriv, quotient, Some(witness.clone()))
}

fn extend_derivation_impl(
    deriv: &HigherModuleDerivation,
    quotient: &QuotientModule,
    supplied: Option<IdealSpec>,
) -> Result<ExtendedHigherDerivation, CoreError> {
    if !deriv.is_valid() {
        let detail = match deriv.status() {
            WellDefStatus::Invalid(f) => f.render(),
            WellDefStatus::Valid => unreachable!(),
        };
        return Err(CoreError::ExtensionPrerequisite(format!(
            "family is not well defined: {detail}"
        )));
    }
    let n = deriv.order();
    let decomp = quotient.base();
    for (j, t) in decomp.torsion_generators().iter().enumerate() {
        for i in 1..=n {
            let image = deriv.eval(i, t)?;
            if !decomp.element_is_torsion(&image) {
                return Err(CoreError::ExtensionPrerequisite(format!(
                    "component {} sends torsion generator {} outside the torsion submodule",
                    i,
                    j + 1
                )));
            }
        }
    }
    let witness = match supplied {
        Some(w) => w,
        None => filter_delta_invariant(
            quotient.filter(),
            deriv.ring(),
            &quotient.filter().power_ideal(1),
        )?
        .ok_or_else(|| {
            CoreError::ExtensionPrerequisite(
                "no invariance witness for the filter within the search bound".into(),
            )
        })?,
    };
    let dbar = HigherModuleDerivation::new(
        deriv.ring().clone(),
        quotient.carrier().clone(),
        deriv.images().to_vec(),
    )?;
    if let WellDefStatus::Invalid(f) = dbar.status() {
        return Err(CoreError::WellDefinedness(format!(
            "pushed-down family lost well-definedness on the carrier: {}",
            f.render()
        )));
    }
    Ok(ExtendedHigherDerivation {
        base: deriv.clone(),
        quotient: quotient.clone(),
        dbar,
        invariance_witness: witness,
    })
}

impl ExtendedHigherDerivation {
    pub fn order(&self) -> usize {
        self.base.order()
    }

    pub fn base(&self) -> &HigherModuleDerivation {
        &self.base
    }

    pub fn quotient(&self) -> &QuotientModule {
        &self.quotient
    }

    pub fn pushed_down(&self) -> &HigherModuleDerivation {
        &self.dbar
    }

    pub fn invariance_witness(&self) -> &IdealSpec {
        &self.invariance_witness
    }

    fn ring(&self) -> &HigherRingDerivation {
        self.base.ring()
    }

    /// All lifts `L_0(q), ..., L_n(q)` by the triangular recursion.
    pub fn lift_all(&self, q: &LocalizedElement) -> Result<Vec<LocalizedElement>, CoreError> {
        let n = self.order();
        let p = q.exponent;
        let fp = self.quotient.f().pow(p);
        let mut lifts: Vec<LocalizedElement> = Vec::with_capacity(n + 1);
        lifts.push(LocalizedElement {
            numerator: self.quotient.carrier().canonical_rep(&q.numerator),
            exponent: p,
        });
        for k in 1..=n {
            let mut acc = self
                .quotient
                .from_class(&self.dbar.eval(k, &q.numerator)?);
            for i in 1..=k {
                let c = self.ring().eval_poly(i, &fp)?;
                if c.is_zero() {
                    continue;
                }
                let term = self.quotient.scale_poly(&lifts[k - i], &c);
                acc = self.quotient.sub(&acc, &term);
            }
            lifts.push(self.quotient.divide_by_f_power(&acc, p));
        }
        Ok(lifts)
    }

    pub fn lift(&self, k: usize, q: &LocalizedElement) -> Result<LocalizedElement, CoreError> {
        if k > self.order() {
            return Err(CoreError::OrderRange {
                k,
                order: self.order(),
            });
        }
        Ok(self.lift_all(q)?.swap_remove(k))
    }

    /// `lift_k(phi(m)) = phi(D_k(m))` on every parent generator.
    pub fn compatibility_square(&self) -> Result<ExtensionReport, CoreError> {
        let gens = self.base.module().generators();
        let mut checked = 0;
        for j in 0..gens {
            let e = ModuleElement::unit(gens, j);
            let lifted = self.lift_all(&self.quotient.phi(&e))?;
            for k in 0..=self.order() {
                let direct = self.quotient.phi(&self.base.eval(k, &e)?);
                checked += 1;
                if !self.quotient.eq(&lifted[k], &direct) {
                    return Ok(ExtensionReport::failing(
                        checked,
                        format!(
                            "k={} generator e{}: lift gives {}, direct image {}",
                            k,
                            j + 1,
                            lifted[k].render(self.quotient.f()),
                            direct.render(self.quotient.f())
                        ),
                    ));
                }
            }
        }
        Ok(ExtensionReport::passing(checked))
    }

    /// Denominator sweep bound covering every term the recursion can
    /// produce at this order.
    pub fn denominator_bound(&self) -> usize {
        self.order() + self.quotient.base().exponent_bound() + 2
    }

    /// Full validation: compatibility square, representative
    /// independence, and the Leibniz chain on sampled fractions.
    pub fn validate(&self, seed: u64) -> Result<ExtensionReport, CoreError> {
        use rand::{Rng, SeedableRng};
        let compat = self.compatibility_square()?;
        if !compat.pass {
            return Ok(compat);
        }
        let mut checked = compat.checked;
        let gens = self.quotient.carrier().generators();
        let n = self.order();
        let pbound = self.denominator_bound();

        // Representative independence on the spanning set: (m, p) and
        // (f^t m, p + t) lift identically.
        for j in 0..gens {
            for p in 0..=pbound {
                let q = LocalizedElement {
                    numerator: ModuleElement::unit(gens, j),
                    exponent: p,
                };
                let lifted = self.lift_all(&q)?;
                for t in 1..=2usize {
                    let shifted = LocalizedElement {
                        numerator: q.numerator.scale(&self.quotient.f().pow(t)),
                        exponent: p + t,
                    };
                    let alt = self.lift_all(&shifted)?;
                    for k in 0..=n {
                        checked += 1;
                        if !self.quotient.eq(&lifted[k], &alt[k]) {
                            return Ok(ExtensionReport::failing(
                                checked,
                                format!(
                                    "k={} representatives e{}/f^{} and its f^{}-shift lift differently: {} vs {}",
                                    k,
                                    j + 1,
                                    p,
                                    t,
                                    lifted[k].render(self.quotient.f()),
                                    alt[k].render(self.quotient.f())
                                ),
                            ));
                        }
                    }
                }
            }
        }

        // Leibniz chain on the localization: L_k(a q) = sum_i d_i(a) L_{k-i}(q),
        // with a = f included deliberately.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut scalars = vec![self.quotient.f().clone()];
        for _ in 0..12 {
            let deg = rng.random_range(0..=3usize);
            scalars.push(Poly::from_coeffs(
                (0..=deg)
                    .map(|_| crate::rat::rat_int(rng.random_range(-3..=3)))
                    .collect(),
            ));
        }
        for a in &scalars {
            for _ in 0..4 {
                let j = rng.random_range(0..gens.max(1));
                if gens == 0 {
                    break;
                }
                let p = rng.random_range(0..=pbound);
                let q = LocalizedElement {
                    numerator: ModuleElement::unit(gens, j)
                        .scale(&Poly::from_coeffs(vec![
                            crate::rat::rat_int(rng.random_range(-2..=2)),
                            crate::rat::rat_int(rng.random_range(-2..=2)),
                        ])),
                    exponent: p,
                };
                let aq = self.quotient.scale_poly(&q, a);
                let left = self.lift_all(&aq)?;
                let right_parts = self.lift_all(&q)?;
                for k in 0..=n {
                    let mut rhs = self.quotient.zero();
                    for i in 0..=k {
                        let c = self.ring().eval_poly(i, a)?;
                        if c.is_zero() {
                            continue;
                        }
                        rhs = self
                            .quotient
                            .add(&rhs, &self.quotient.scale_poly(&right_parts[k - i], &c));
                    }
                    checked += 1;
                    if !self.quotient.eq(&left[k], &rhs) {
                        return Ok(ExtensionReport::failing(
                            checked,
                            format!(
                                "k={} scalar {}: chain gives {}, lift gives {}",
                                k,
                                a,
                                rhs.render(self.quotient.f()),
                                left[k].render(self.quotient.f())
                            ),
                        ));
                    }
                }
            }
        }
        Ok(ExtensionReport::passing(checked))
    }
}

/// Compares two extensions of the same family on the spanning set of
/// fractions (generators over denominators up to the recursion bound).
/// Mismatched bases are an input error, not a finding.
pub fn verify_uniqueness(
    e1: &ExtendedHigherDerivation,
    e2: &ExtendedHigherDerivation,
) -> Result<ExtensionReport, CoreError> {
    if e1.order() != e2.order() {
        return Err(CoreError::InvalidArgument(format!(
            "orders differ: {} vs {}",
            e1.order(),
            e2.order()
        )));
    }
    let n = e1.order();
    for k in 1..=n {
        if e1.ring().gen_value(k)? != e2.ring().gen_value(k)? {
            return Err(CoreError::InvalidArgument(format!(
                "ring families differ at component {k}"
            )));
        }
    }
    let gens = e1.base.module().generators();
    if gens != e2.base.module().generators() {
        return Err(CoreError::InvalidArgument(
            "module presentations differ".into(),
        ));
    }
    for k in 1..=n {
        for j in 0..gens {
            let a = e1.base.image(k, j);
            let b = e2.base.image(k, j);
            if !e1.base.module().elems_equal(&a, &b) {
                return Err(CoreError::InvalidArgument(format!(
                    "base families differ at component {} generator {}",
                    k,
                    j + 1
                )));
            }
        }
    }
    let qgens = e1.quotient.carrier().generators();
    let bound = e1.denominator_bound().max(e2.denominator_bound());
    let mut checked = 0;
    for j in 0..qgens {
        for p in 0..=bound {
            let q = LocalizedElement {
                numerator: ModuleElement::unit(qgens, j),
                exponent: p,
            };
            let l1 = e1.lift_all(&q)?;
            let l2 = e2.lift_all(&q)?;
            for k in 0..=n {
                checked += 1;
                if !e1.quotient.eq(&l1[k], &l2[k]) {
                    return Ok(ExtensionReport::failing(
                        checked,
                        format!(
                            "k={} fraction e{}/f^{}: {} vs {}",
                            k,
                            j + 1,
                            p,
                            l1[k].render(e1.quotient.f()),
                            l2[k].render(e2.quotient.f())
                        ),
                    ));
                }
            }
        }
    }
    Ok(ExtensionReport::passing(checked))
}

/// Both directions of the extension equivalence for one instance.
#[derive(Clone, Debug)]
pub struct Thm55Report {
    pub forward: crate::torsion::ConditionReport,
    pub converse: crate::torsion::ConditionReport,
    pub pass: bool,
}

/// Forward: when the instance is higher differential, the extension must
/// build and validate. Converse: when an extension satisfying the
/// compatibility square exists, the components must keep torsion inside
/// torsion (through the kernel of the canonical map).
pub fn check_thm55(
    deriv: &HigherModuleDerivation,
    filter: &GabrielFilterSpec,
    seed: u64,
) -> Result<Thm55Report, CoreError> {
    let module = deriv.module();
    let quotient = QuotientModule::build(module, filter);
    let decomp = quotient.base();
    let n = deriv.order();

    // The higher-differential property for this instance.
    let mut differential = true;
    for t in decomp.torsion_generators() {
        for i in 1..=n {
            if !decomp.element_is_torsion(&deriv.eval(i, t)?) {
                differential = false;
            }
        }
    }

    let extension = extend_derivation(deriv, &quotient);
    let forward = match (&extension, differential) {
        (Ok(ext), true) => {
            let rep = ext.validate(seed)?;
            crate::torsion::ConditionReport {
                name: "forward".into(),
                holds: rep.pass,
                detail: match rep.witness {
                    None => format!(
                        "extension built and validated ({} comparisons); witness {}",
                        rep.checked,
                        ext.invariance_witness().render()
                    ),
                    Some(w) => w,
                },
            }
        }
        (Err(e), false) => crate::torsion::ConditionReport {
            name: "forward".into(),
            holds: true,
            detail: format!("not higher differential; extension refused as required ({e})"),
        },
        (Ok(_), false) => crate::torsion::ConditionReport {
            name: "forward".into(),
            holds: false,
            detail: "extension built although the instance is not higher differential".into(),
        },
        (Err(e), true) => crate::torsion::ConditionReport {
            name: "forward".into(),
            holds: false,
            detail: format!("higher differential but the extension failed: {e}"),
        },
    };

    // Converse: with an extension in hand, each component image of each
    // torsion generator must die under the canonical map.
    let converse = match &extension {
        Ok(_) => {
            let mut holds = true;
            let mut detail = String::from("component images of torsion generators die in Q");
            'conv: for (j, t) in decomp.torsion_generators().iter().enumerate() {
                for i in 1..=n {
                    let image = deriv.eval(i, t)?;
                    if !quotient.is_zero_elem(&quotient.phi(&image)) {
                        holds = false;
                        detail = format!(
                            "component {} of torsion generator {} survives the canonical map",
                            i,
                            j + 1
                        );
                        break 'conv;
                    }
                }
            }
            crate::torsion::ConditionReport {
                name: "converse".into(),
                holds,
                detail,
            }
        }
        Err(e) => crate::torsion::ConditionReport {
            name: "converse".into(),
            holds: true,
            detail: format!("no extension exists to test against ({e})"),
        },
    };

    let pass = forward.holds && converse.holds;
    Ok(Thm55Report {
        forward,
        converse,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hasse_ring::OrdinaryRingDerivation;
    use crate::polymat::PolyMatrix;
    use crate::rat::rat_int;

    fn x() -> Poly {
        Poly::x()
    }

    fn exp_ddx(order: usize) -> HigherRingDerivation {
        HigherRingDerivation::make_exp(&OrdinaryRingDerivation::on_poly(Poly::one()), order)
            .unwrap()
    }

    fn free_exp_deriv(order: usize) -> HigherModuleDerivation {
        let module = PresentedModule::free(1);
        HigherModuleDerivation::new(
            exp_ddx(order),
            module,
            vec![vec![ModuleElement::zero(1)]; order],
        )
        .unwrap()
    }

    #[test]
    fn localization_equality_goldens() {
        // (e, 1) = (e, 0) in the localization of Q[x]/(x^2 (x-1)) at x,
        // because x acts invertibly (as 1) on the quotient Q[x]/(x-1).
        let p = &x().pow(2) * &(&x() - &Poly::one());
        let module = PresentedModule::cyclic(&p);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(&module, &filter);
        assert_eq!(q.carrier().qdim(), Some(1));
        let e = ModuleElement::unit(1, 0);
        let e0 = LocalizedElement {
            numerator: e.clone(),
            exponent: 0,
        };
        let e1 = LocalizedElement {
            numerator: e.clone(),
            exponent: 1,
        };
        assert!(q.eq(&e0, &e1));
        // And the nonzero class is not the zero fraction.
        assert!(!q.eq(&e0, &q.zero()));
        q.kernel_matches_torsion().unwrap();
        // The torsion generator dies under the canonical map.
        let t = &q.base().torsion_generators()[0];
        assert!(q.is_zero_elem(&q.phi(t)));
    }

    #[test]
    fn torsion_module_localizes_to_zero() {
        let module = PresentedModule::cyclic(&x().pow(2));
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(&module, &filter);
        assert!(q.is_zero_module());
        let e = ModuleElement::unit(1, 0);
        assert!(q.is_zero_elem(&q.phi(&e)));
        q.kernel_matches_torsion().unwrap();
    }

    #[test]
    fn free_module_injects() {
        let module = PresentedModule::free(2);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(&module, &filter);
        q.kernel_matches_torsion().unwrap();
        let v = ModuleElement::from_polys(vec![x(), Poly::one()]);
        assert!(!q.is_zero_elem(&q.phi(&v)));
    }

    #[test]
    fn lift_of_inverse_powers_golden() {
        // M = Q[x], exp(d/dx), images zero: L_k(e/x) = (-1)^k e / x^{k+1}.
        let deriv = free_exp_deriv(5);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(deriv.module(), &filter);
        let ext = extend_derivation(&deriv, &q).unwrap();
        let frac = LocalizedElement {
            numerator: ModuleElement::unit(1, 0),
            exponent: 1,
        };
        let lifts = ext.lift_all(&frac).unwrap();
        for (k, lift) in lifts.iter().enumerate() {
            let sign = if k % 2 == 0 { 1 } else { -1 };
            let expected = LocalizedElement {
                numerator: ModuleElement::from_polys(vec![Poly::int(sign)]),
                exponent: k + 1,
            };
            assert!(q.eq(lift, &expected), "k={k}");
        }
        // Exponent-zero fractions reduce to the compatibility square.
        let whole = LocalizedElement {
            numerator: ModuleElement::from_polys(vec![x().pow(3)]),
            exponent: 0,
        };
        let lifted = ext.lift(2, &whole).unwrap();
        let direct = q.phi(
            &deriv
                .eval(2, &ModuleElement::from_polys(vec![x().pow(3)]))
                .unwrap(),
        );
        assert!(q.eq(&lifted, &direct));
        assert!(ext.validate(5).unwrap().pass);
    }

    #[test]
    fn order_one_quotient_rule_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        for _ in 0..50 {
            // Ring family of order 1 with random value at x; module family
            // with random image of the single free generator.
            let v = Poly::from_coeffs(
                (0..=rng.random_range(0..=3usize))
                    .map(|_| rat_int(rng.random_range(-3..=3)))
                    .collect(),
            );
            let w = Poly::from_coeffs(
                (0..=rng.random_range(0..=3usize))
                    .map(|_| rat_int(rng.random_range(-3..=3)))
                    .collect(),
            );
            let ring = HigherRingDerivation::from_gen_values(vec![v.clone()]);
            let module = PresentedModule::free(1);
            let deriv = HigherModuleDerivation::new(
                ring,
                module.clone(),
                vec![vec![ModuleElement::from_polys(vec![w.clone()])]],
            )
            .unwrap();
            let q = QuotientModule::build(&module, &filter);
            let ext = extend_derivation(&deriv, &q).unwrap();
            let m = Poly::from_coeffs(
                (0..=rng.random_range(0..=3usize))
                    .map(|_| rat_int(rng.random_range(-3..=3)))
                    .collect(),
            );
            let frac = LocalizedElement {
                numerator: ModuleElement::from_polys(vec![m.clone()]),
                exponent: 1,
            };
            let lifted = ext.lift(1, &frac).unwrap();
            // Classical rule: (D_1(m) f - m d_1(f)) / f^2 with f = x,
            // D_1(m) = m' v + m w and d_1(x) = v.
            let d1m = &(&m.derivative() * &v) + &(&m * &w);
            let num = &(&d1m * &x()) - &(&m * &v);
            let expected = LocalizedElement {
                numerator: ModuleElement::from_polys(vec![num]),
                exponent: 2,
            };
            assert!(q.eq(&lifted, &expected));
        }
    }

    #[test]
    fn extension_refused_without_higher_differential_property() {
        // Torsion with a family whose very construction cannot be well
        // defined: refusal comes from the validity gate.
        let module = PresentedModule::cyclic(&x().pow(2));
        let deriv = HigherModuleDerivation::new(
            exp_ddx(1),
            module.clone(),
            vec![vec![ModuleElement::zero(1)]],
        )
        .unwrap();
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(&module, &filter);
        let err = extend_derivation(&deriv, &q).unwrap_err();
        assert_eq!(err.code(), "E013");
    }

    #[test]
    fn golden_mixed_instance_extends_and_is_unique() {
        // M = Q[x]/(x^2 (x-1)) (+) Q[x], stride-4 rescaled exp family of
        // order 3, D_1(e2) = e1: extension exists, validates, and is
        // unique on the spanning fractions.
        let p = &x().pow(2) * &(&x() - &Poly::one());
        let rel = PolyMatrix::from_rows(vec![vec![p, Poly::zero()]]);
        let module = PresentedModule::new(2, rel).unwrap();
        let ring = exp_ddx(3).make_rescaled(4).unwrap();
        let zero2 = ModuleElement::zero(2);
        let images = vec![
            vec![zero2.clone(), ModuleElement::unit(2, 0)],
            vec![zero2.clone(), zero2.clone()],
            vec![zero2.clone(), zero2.clone()],
        ];
        let deriv = HigherModuleDerivation::new(ring, module.clone(), images).unwrap();
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(&module, &filter);
        let ext = extend_derivation(&deriv, &q).unwrap();
        assert!(ext.validate(23).unwrap().pass);
        let again = extend_derivation(&deriv, &q).unwrap();
        let rep = verify_uniqueness(&ext, &again).unwrap();
        assert!(rep.pass);
        // Thm 5.5 both directions.
        let t55 = check_thm55(&deriv, &filter, 29).unwrap();
        assert!(t55.pass, "{:?}", t55);
    }

    #[test]
    fn hand_expanded_closed_forms_low_orders() {
        // The triangular recursion, unrolled by hand for k <= 3 into
        // single fractions, must agree with lift_all. With A_i = d_i(f^p)
        // and B_k = Dbar_k(m):
        //   L1 = (B1 f^p - A1 m) / f^{2p}
        //   L2 = (B2 f^{2p} - A1 B1 f^p + (A1^2 - A2 f^p) m) / f^{3p}
        //   L3 = (B3 f^{3p} - (A1 B2 + A2 B1) f^{2p} + A1^2 B1 f^p
        //         + (-A1^3 + 2 A1 A2 f^p - A3 f^{2p}) m) / f^{4p}
        let module = PresentedModule::free(1);
        let ring = exp_ddx(3);
        let w = |c0: i64, c1: i64| ModuleElement::from_polys(vec![Poly::from_coeffs(vec![
            rat_int(c0),
            rat_int(c1),
        ])]);
        let deriv = HigherModuleDerivation::new(
            ring,
            module.clone(),
            vec![vec![w(1, 2)], vec![w(0, 1)], vec![w(3, 0)]],
        )
        .unwrap();
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(&module, &filter);
        let ext = extend_derivation(&deriv, &q).unwrap();
        let p = 2usize;
        let fp = x().pow(p);
        let m = &x() + &Poly::int(3);
        let me = ModuleElement::from_polys(vec![m.clone()]);
        let frac = LocalizedElement {
            numerator: me.clone(),
            exponent: p,
        };
        let lifts = ext.lift_all(&frac).unwrap();
        let a: Vec<Poly> = (0..=3)
            .map(|i| ext.pushed_down().ring().eval_poly(i, &fp).unwrap())
            .collect();
        let b: Vec<ModuleElement> = (0..=3)
            .map(|k| ext.pushed_down().eval(k, &me).unwrap())
            .collect();
        let fpk = |j: usize| fp.pow(j);
        let l1 = LocalizedElement {
            numerator: b[1].scale(&fpk(1)).sub(&me.scale(&a[1])),
            exponent: 2 * p,
        };
        let c2 = &(&a[1] * &a[1]) - &(&a[2] * &fpk(1));
        let l2 = LocalizedElement {
            numerator: b[2]
                .scale(&fpk(2))
                .sub(&b[1].scale(&(&a[1] * &fpk(1))))
                .add(&me.scale(&c2)),
            exponent: 3 * p,
        };
        let a1sq = &a[1] * &a[1];
        let c3 = &(&(&(&a[1] * &a[2]).scaled(&rat_int(2)) * &fpk(1))
            - &(&a1sq * &a[1]))
            - &(&a[3] * &fpk(2));
        let l3 = LocalizedElement {
            numerator: b[3]
                .scale(&fpk(3))
                .sub(&b[2].scale(&(&a[1] * &fpk(2))))
                .sub(&b[1].scale(&(&a[2] * &fpk(2))))
                .add(&b[1].scale(&(&a1sq * &fpk(1))))
                .add(&me.scale(&c3)),
            exponent: 4 * p,
        };
        assert!(q.eq(&lifts[1], &l1));
        assert!(q.eq(&lifts[2], &l2));
        assert!(q.eq(&lifts[3], &l3));
    }

    #[test]
    fn enlarged_witness_gives_identical_lifts() {
        let deriv = free_exp_deriv(3);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(deriv.module(), &filter);
        let e1 = extend_derivation(&deriv, &q).unwrap();
        // Any (f^m) with m >= order + 1 qualifies; take several sizes.
        for extra in [1usize, 3, 6] {
            let m = deriv.order() + 1 + extra;
            let witness = IdealSpec::principal(x().pow(m));
            let e2 = extend_derivation_with_witness(&deriv, &q, &witness).unwrap();
            assert_eq!(e2.invariance_witness().render(), witness.render());
            let rep = verify_uniqueness(&e1, &e2).unwrap();
            assert!(rep.pass, "witness {}: {:?}", witness.render(), rep.witness);
        }
        // A non-witness is refused: (x) itself fails at component 1,
        // since d_1(x) = 1 is not divisible by x.
        let err =
            extend_derivation_with_witness(&deriv, &q, &IdealSpec::principal(x())).unwrap_err();
        assert_eq!(err.code(), "E014");
        // An ideal outside the filter is a different refusal.
        let err = extend_derivation_with_witness(
            &deriv,
            &q,
            &IdealSpec::principal(&x() - &Poly::one()),
        )
        .unwrap_err();
        assert_eq!(err.code(), "E011");
    }

    #[test]
    fn uniqueness_negative_control() {
        // Perturb the pushed-down family on one generator: comparison
        // must fail with a witness fraction.
        let deriv = free_exp_deriv(2);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(deriv.module(), &filter);
        let e1 = extend_derivation(&deriv, &q).unwrap();
        let mut e2 = e1.clone();
        e2.dbar = HigherModuleDerivation::new(
            deriv.ring().clone(),
            q.carrier().clone(),
            vec![
                vec![ModuleElement::unit(1, 0)],
                vec![ModuleElement::zero(1)],
            ],
        )
        .unwrap();
        let rep = verify_uniqueness(&e1, &e2).unwrap();
        assert!(!rep.pass);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn uniqueness_rejects_mismatched_bases() {
        let d1 = free_exp_deriv(2);
        let module = PresentedModule::free(1);
        let d2 = HigherModuleDerivation::new(
            exp_ddx(2),
            module,
            vec![vec![ModuleElement::unit(1, 0)], vec![ModuleElement::zero(1)]],
        )
        .unwrap();
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(d1.module(), &filter);
        let e1 = extend_derivation(&d1, &q).unwrap();
        let e2 = extend_derivation(&d2, &q).unwrap();
        assert_eq!(verify_uniqueness(&e1, &e2).unwrap_err().code(), "E014");
    }

    #[test]
    fn truncation_commutes_with_extension() {
        let deriv = free_exp_deriv(4);
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let q = QuotientModule::build(deriv.module(), &filter);
        let full = extend_derivation(&deriv, &q).unwrap();
        // Truncate the base family to order 2 and extend.
        let truncated = HigherModuleDerivation::new(
            deriv.ring().truncate(2).unwrap(),
            deriv.module().clone(),
            deriv.images()[..2].to_vec(),
        )
        .unwrap();
        let ext2 = extend_derivation(&truncated, &q).unwrap();
        for p in 0..=3usize {
            let frac = LocalizedElement {
                numerator: ModuleElement::unit(1, 0).scale(&(&x() + &Poly::one())),
                exponent: p,
            };
            let full_lifts = full.lift_all(&frac).unwrap();
            let trunc_lifts = ext2.lift_all(&frac).unwrap();
            for k in 0..=2usize {
                assert!(q.eq(&full_lifts[k], &trunc_lifts[k]));
            }
        }
    }

    #[test]
    fn thm55_vacuous_cases() {
        // Fully torsion module with a valid family: Q = 0, both
        // directions hold vacuously.
        let module = PresentedModule::cyclic(&x().pow(2));
        let ring = HigherRingDerivation::identity_only_poly(1);
        let deriv = HigherModuleDerivation::new(
            ring,
            module.clone(),
            vec![vec![ModuleElement::unit(1, 0)]],
        )
        .unwrap();
        let filter = GabrielFilterSpec::new(&x()).unwrap();
        let report = check_thm55(&deriv, &filter, 31).unwrap();
        assert!(report.pass);
        // Torsion-free module: forward reduces to the plain extension.
        let free = free_exp_deriv(3);
        let report = check_thm55(&free, &filter, 37).unwrap();
        assert!(report.pass);
    }
}
