//! Python bindings for the core types: exact polynomials, presented
//! modules, higher derivation families, torsion decompositions,
//! localized extensions, and the scenario runner.
//!
//! Polynomials cross the boundary as expression strings (`"x^2 - 1/3"`)
//! and come back in the same canonical form, so round trips stay exact.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hasse_core::error::CoreError;
use hasse_core::hasse_module::HigherModuleDerivation;
use hasse_core::hasse_ring::{HigherRingDerivation, OrdinaryRingDerivation};
use hasse_core::poly::Poly as CorePoly;
use hasse_core::polymat::PolyMatrix;
use hasse_core::presented::{ModuleElement, PresentedModule};
use hasse_core::quotients::{
    extend_derivation, extend_derivation_with_witness, ExtendedHigherDerivation, LocalizedElement,
    QuotientModule,
};
use hasse_core::runner::{run_scenario, RunFlags};
use hasse_core::scenario::{parse_poly, parse_scenario};
use hasse_core::torsion::{torsion_submodule, GabrielFilterSpec, IdealSpec};

fn err(e: CoreError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn poly_arg(text: &str) -> PyResult<CorePoly> {
    parse_poly(text).map_err(err)
}

/// Exact rational-coefficient polynomial in `x`.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Poly {
    inner: CorePoly,
}

#[pymethods]
impl Poly {
    #[new]
    fn new(expr: &str) -> PyResult<Self> {
        Ok(Poly { inner: poly_arg(expr)? })
    }

    #[staticmethod]
    fn x() -> Self {
        Poly { inner: CorePoly::x() }
    }

    fn degree(&self) -> Option<usize> {
        self.inner.degree()
    }

    fn derivative(&self) -> Self {
        Poly { inner: self.inner.derivative() }
    }

    fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    fn __add__(&self, other: &Poly) -> Self {
        Poly { inner: &self.inner + &other.inner }
    }

    fn __sub__(&self, other: &Poly) -> Self {
        Poly { inner: &self.inner - &other.inner }
    }

    fn __mul__(&self, other: &Poly) -> Self {
        Poly { inner: &self.inner * &other.inner }
    }

    fn __pow__(&self, k: usize, _mod: Option<usize>) -> Self {
        Poly { inner: self.inner.pow(k) }
    }

    fn __neg__(&self) -> Self {
        Poly { inner: -&self.inner }
    }

    fn __richcmp__(&self, other: &Poly, op: pyo3::basic::CompareOp) -> PyResult<bool> {
        match op {
            pyo3::basic::CompareOp::Eq => Ok(self.inner == other.inner),
            pyo3::basic::CompareOp::Ne => Ok(self.inner != other.inner),
            _ => Err(PyValueError::new_err("polynomials are not ordered")),
        }
    }

    fn __str__(&self) -> String {
        format!("{}", self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Poly('{}')", self.inner)
    }
}

/// Finitely presented `Q[x]`-module: generators plus relation rows.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Module {
    inner: PresentedModule,
}

fn parse_rows(relations: Vec<Vec<String>>, gens: usize) -> PyResult<PolyMatrix> {
    if relations.is_empty() {
        return Ok(PolyMatrix::empty(gens));
    }
    let mut rows = Vec::with_capacity(relations.len());
    for row in relations {
        if row.len() != gens {
            return Err(PyValueError::new_err(format!(
                "relation row has {} entries for {} generators",
                row.len(),
                gens
            )));
        }
        let parsed: PyResult<Vec<CorePoly>> = row.iter().map(|s| poly_arg(s)).collect();
        rows.push(parsed?);
    }
    Ok(PolyMatrix::from_rows(rows))
}

#[pymethods]
impl Module {
    #[new]
    #[pyo3(signature = (generators, relations=Vec::new()))]
    fn new(generators: usize, relations: Vec<Vec<String>>) -> PyResult<Self> {
        let m = PresentedModule::new(generators, parse_rows(relations, generators)?).map_err(err)?;
        Ok(Module { inner: m })
    }

    #[staticmethod]
    fn free(rank: usize) -> Self {
        Module { inner: PresentedModule::free(rank) }
    }

    fn generators(&self) -> usize {
        self.inner.generators()
    }

    fn free_rank(&self) -> usize {
        self.inner.free_rank()
    }

    fn invariant_factors(&self) -> Vec<String> {
        self.inner.invariant_factors().iter().map(|p| p.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Module(generators={}, relations={})",
            self.inner.generators(),
            self.inner.relations().rows()
        )
    }
}

fn parse_element(coords: &[String], gens: usize) -> PyResult<ModuleElement> {
    if coords.len() != gens {
        return Err(PyValueError::new_err(format!(
            "element has {} coordinates for {} generators",
            coords.len(),
            gens
        )));
    }
    let parsed: PyResult<Vec<CorePoly>> = coords.iter().map(|s| poly_arg(s)).collect();
    Ok(ModuleElement::from_polys(parsed?))
}

fn element_strings(v: &ModuleElement) -> Vec<String> {
    v.coords.iter().map(|p| p.to_string()).collect()
}

/// Higher derivation family on `Q[x]`, order `n`, determined by the
/// images of `x`.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct RingDerivation {
    inner: HigherRingDerivation,
}

#[pymethods]
impl RingDerivation {
    /// Family with prescribed images of `x`, one per component.
    #[new]
    fn new(gen_values: Vec<String>) -> PyResult<Self> {
        let vals: PyResult<Vec<CorePoly>> = gen_values.iter().map(|s| poly_arg(s)).collect();
        Ok(RingDerivation { inner: HigherRingDerivation::from_gen_values(vals?) })
    }

    /// The truncated exponential of the ordinary derivation sending
    /// `x` to `delta`.
    #[staticmethod]
    fn exp(delta: &str, order: usize) -> PyResult<Self> {
        let d = OrdinaryRingDerivation::on_poly(poly_arg(delta)?);
        Ok(RingDerivation { inner: HigherRingDerivation::make_exp(&d, order).map_err(err)? })
    }

    /// Same components pushed to indices `stride, 2*stride, ...`.
    fn rescaled(&self, stride: usize) -> PyResult<Self> {
        Ok(RingDerivation { inner: self.inner.make_rescaled(stride).map_err(err)? })
    }

    fn order(&self) -> usize {
        self.inner.order()
    }

    fn gen_value(&self, k: usize) -> PyResult<String> {
        Ok(self.inner.gen_value(k).map_err(err)?.to_string())
    }

    /// Applies component `k` to a polynomial.
    fn eval(&self, k: usize, a: &str) -> PyResult<String> {
        Ok(self.inner.eval_poly(k, &poly_arg(a)?).map_err(err)?.to_string())
    }

    /// Ordinary stages, as their images of `x`.
    fn to_ordinary(&self) -> PyResult<Vec<String>> {
        let seq = self.inner.to_ordinary_sequence().map_err(err)?;
        seq.entries
            .iter()
            .map(|e| match e {
                OrdinaryRingDerivation::Poly { value } => Ok(value.to_string()),
                _ => Err(PyValueError::new_err("finite carrier stage")),
            })
            .collect()
    }

    fn validate(&self, seed: u64) -> bool {
        self.inner.validate_higher_leibniz(seed).pass
    }

    fn __repr__(&self) -> String {
        format!("RingDerivation(order={})", self.inner.order())
    }
}

/// Higher derivation family on a presented module over a ring family.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct ModuleDerivation {
    inner: HigherModuleDerivation,
}

#[pymethods]
impl ModuleDerivation {
    /// `images[k][j]` is the component `k+1` image of generator `j`,
    /// as coordinate expressions.
    #[new]
    fn new(ring: &RingDerivation, module: &Module, images: Vec<Vec<Vec<String>>>) -> PyResult<Self> {
        let gens = module.inner.generators();
        let mut parsed = Vec::with_capacity(images.len());
        for stage in &images {
            if stage.len() != gens {
                return Err(PyValueError::new_err(format!(
                    "stage has {} images for {} generators",
                    stage.len(),
                    gens
                )));
            }
            let row: PyResult<Vec<ModuleElement>> =
                stage.iter().map(|coords| parse_element(coords, gens)).collect();
            parsed.push(row?);
        }
        let d = HigherModuleDerivation::new(ring.inner.clone(), module.inner.clone(), parsed)
            .map_err(err)?;
        Ok(ModuleDerivation { inner: d })
    }

    fn order(&self) -> usize {
        self.inner.order()
    }

    fn is_valid(&self) -> bool {
        self.inner.is_valid()
    }

    fn validate(&self, seed: u64) -> bool {
        self.inner.validate(seed).pass
    }

    /// Applies component `k` to an element given by coordinates.
    fn eval(&self, k: usize, coords: Vec<String>) -> PyResult<Vec<String>> {
        let v = parse_element(&coords, self.inner.module().generators())?;
        Ok(element_strings(&self.inner.eval(k, &v).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "ModuleDerivation(order={}, generators={})",
            self.inner.order(),
            self.inner.module().generators()
        )
    }
}

/// Torsion decomposition of a module at the powers of `f`.
#[pyfunction]
fn torsion<'py>(py: Python<'py>, module: &Module, f: &str) -> PyResult<Bound<'py, PyDict>> {
    let filter = GabrielFilterSpec::new(&poly_arg(f)?).map_err(err)?;
    let dec = torsion_submodule(&module.inner, &filter);
    let out = PyDict::new(py);
    out.set_item(
        "torsion_invariants",
        dec.torsion_invariants().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    )?;
    out.set_item("torsion_dim", dec.torsion_qdim())?;
    out.set_item("annihilator_exponents", dec.annihilator_exponents().to_vec())?;
    out.set_item(
        "quotient_invariants",
        dec.quotient().invariant_factors().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    )?;
    out.set_item("quotient_free_rank", dec.quotient().free_rank())?;
    Ok(out)
}

/// A derivation family carried across localization at `f`.
#[pyclass(frozen)]
struct Extension {
    inner: ExtendedHigherDerivation,
    quotient: QuotientModule,
}

#[pymethods]
impl Extension {
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn witness(&self) -> String {
        self.inner.invariance_witness().render()
    }

    /// Carrier generator count of the localized module.
    fn carrier_generators(&self) -> usize {
        self.quotient.carrier().generators()
    }

    /// Lift of component `k` on the fraction `coords / f^exponent`,
    /// returned as `(coords, exponent)`.
    fn lift(&self, k: usize, coords: Vec<String>, exponent: usize) -> PyResult<(Vec<String>, usize)> {
        let v = parse_element(&coords, self.quotient.carrier().generators())?;
        let frac = LocalizedElement { numerator: v, exponent };
        let lifted = self.inner.lift(k, &frac).map_err(err)?;
        Ok((element_strings(&lifted.numerator), lifted.exponent))
    }

    fn validate(&self, seed: u64) -> PyResult<bool> {
        Ok(self.inner.validate(seed).map_err(err)?.pass)
    }

    fn __repr__(&self) -> String {
        format!("Extension(order={}, witness={})", self.inner.order(), self.witness())
    }
}

/// Carries `deriv` across localization at `f`. Raises when the family
/// does not satisfy the prerequisites.
#[pyfunction]
#[pyo3(signature = (deriv, f, witness_exponent=None))]
fn extend(deriv: &ModuleDerivation, f: &str, witness_exponent: Option<usize>) -> PyResult<Extension> {
    let fp = poly_arg(f)?;
    let filter = GabrielFilterSpec::new(&fp).map_err(err)?;
    let quotient = QuotientModule::build(deriv.inner.module(), &filter);
    let ext = match witness_exponent {
        Some(m) => {
            extend_derivation_with_witness(&deriv.inner, &quotient, &IdealSpec::principal(fp.pow(m)))
                .map_err(err)?
        }
        None => extend_derivation(&deriv.inner, &quotient).map_err(err)?,
    };
    Ok(Extension { inner: ext, quotient })
}

/// Runs a scenario text and returns `(report, all_passed)`.
#[pyfunction]
#[pyo3(signature = (text, seed=None, format="text"))]
fn run_scenario_text(text: &str, seed: Option<u64>, format: &str) -> PyResult<(String, bool)> {
    let scenario = parse_scenario(text).map_err(err)?;
    let flags = RunFlags { seed, ..RunFlags::default() };
    let report = run_scenario(&scenario, flags).map_err(err)?;
    let rendered = match format {
        "text" => report.render_text(false),
        "json" => report.to_json(),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown format `{other}` (expected text or json)"
            )))
        }
    };
    Ok((rendered, report.all_passed()))
}

#[pymodule]
fn hasse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Poly>()?;
    m.add_class::<Module>()?;
    m.add_class::<RingDerivation>()?;
    m.add_class::<ModuleDerivation>()?;
    m.add_class::<Extension>()?;
    m.add_function(wrap_pyfunction!(torsion, m)?)?;
    m.add_function(wrap_pyfunction!(extend, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_text, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bindings_round_trip() {
        Python::initialize();
        Python::attach(|py| {
            let module = PyModule::new(py, "hasse_py").unwrap();
            hasse_py(&module).unwrap();
            let p = Poly::new("(x + 1)*(x - 1)").unwrap();
            assert_eq!(p.__str__(), "x^2 - 1");
            let d = RingDerivation::exp("1", 3).unwrap();
            assert_eq!(d.eval(2, "x^3").unwrap(), "3*x");
            let m = Module::new(2, vec![vec!["x^2*(x - 1)".into(), "0".into()]]).unwrap();
            let dec = torsion(py, &m, "x").unwrap();
            let dim: usize = dec.get_item("torsion_dim").unwrap().unwrap().extract().unwrap();
            assert_eq!(dim, 2);
        });
    }
}
