//! Elaborates a parsed scenario into typed bindings and executable
//! jobs, then runs the jobs into a report.
//!
//! Declarations elaborate in file order; a command may only reference
//! declarations above itself. Each command's job owns fully resolved
//! data, so execution needs no shared environment: sequential and
//! parallel runs produce identical reports, and each command derives
//! its sampling seed from the base seed and its own index.

use std::collections::HashMap;

use crate::algebra::FinAlgebra;
use crate::error::CoreError;
use crate::hasse_module::HigherModuleDerivation;
use crate::hasse_ring::{HigherRingDerivation, OrdinaryRingDerivation};
use crate::monadic::{DiagramReport, EMModule, MonadRealization};
use crate::poly::Poly;
use crate::polymat::PolyMatrix;
use crate::presented::{ModuleElement, PresentedModule};
use crate::qmat::QMatrix;
use crate::quotients::{
    check_thm55, extend_derivation, extend_derivation_with_witness, verify_uniqueness,
    LocalizedElement, QuotientModule,
};
use crate::rat::{is_negative, rat_int, Rat};
use crate::report::{CommandOutcome, Report, Status};
use crate::scenario::{
    find_entry, Command, CommandKind, Decl, DeclKind, Entry, Item, Scenario, Value,
};
use crate::torsion::{check_thm48_instance, GabrielFilterSpec, IdealSpec};

/// Execution options for a scenario run.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunFlags {
    /// Overrides the scenario's own `config { seed = ... }`.
    pub seed: Option<u64>,
    pub parallel: bool,
    pub fail_fast: bool,
    /// Include wall-clock timing per command (breaks byte determinism).
    pub timing: bool,
}

#[derive(Clone, Debug)]
enum Binding {
    Algebra(FinAlgebra),
    Module(PresentedModule),
    Filter(GabrielFilterSpec),
    RingDeriv(HigherRingDerivation),
    ModuleDeriv(HigherModuleDerivation),
    NatTrans(QMatrix),
}

impl Binding {
    fn kind_name(&self) -> &'static str {
        match self {
            Binding::Algebra(_) => "algebra",
            Binding::Module(_) => "module",
            Binding::Filter(_) => "filter",
            Binding::RingDeriv(_) => "ring derivation family",
            Binding::ModuleDeriv(_) => "module derivation family",
            Binding::NatTrans(_) => "natural transformation",
        }
    }
}

enum Job {
    ValidateRing(HigherRingDerivation),
    ValidateModule(HigherModuleDerivation),
    ConvertRing(HigherRingDerivation),
    ConvertModule(HigherModuleDerivation),
    DiagramMonadLaws {
        algebra: FinAlgebra,
        carriers: Vec<usize>,
    },
    DiagramHigherDeriv {
        algebra: FinAlgebra,
        components: Vec<QMatrix>,
        carriers: Vec<usize>,
    },
    DiagramModuleDeriv {
        module: EMModule,
        ring_components: Vec<QMatrix>,
        module_components: Vec<QMatrix>,
    },
    Torsion {
        module: PresentedModule,
        filter: GabrielFilterSpec,
    },
    Thm48 {
        deriv: HigherModuleDerivation,
        filter: GabrielFilterSpec,
        catalog_bound: usize,
    },
    Quotient {
        module: PresentedModule,
        filter: GabrielFilterSpec,
    },
    Extend {
        deriv: HigherModuleDerivation,
        filter: GabrielFilterSpec,
        witness_exponent: Option<usize>,
    },
    Thm55 {
        deriv: HigherModuleDerivation,
        filter: GabrielFilterSpec,
    },
}

struct CommandJob {
    index: usize,
    label: String,
    job: Job,
}

// ---------- entry readers ----------

fn entry_err(e: &Entry, msg: impl std::fmt::Display) -> CoreError {
    CoreError::MalformedLiteral(format!("line {}: key `{}`: {}", e.line, e.key, msg))
}

fn as_usize(e: &Entry) -> Result<usize, CoreError> {
    match &e.value {
        Value::Number(r) if r.is_integer() && !is_negative(r) => r
            .numer()
            .to_string()
            .parse()
            .map_err(|_| entry_err(e, "integer is too large")),
        _ => Err(entry_err(e, "expected a nonnegative integer")),
    }
}

fn as_poly(v: &Value) -> Option<Poly> {
    match v {
        Value::Number(r) => Some(Poly::constant(r.clone())),
        Value::Poly(p) => Some(p.clone()),
        _ => None,
    }
}

fn entry_poly(e: &Entry) -> Result<Poly, CoreError> {
    as_poly(&e.value).ok_or_else(|| entry_err(e, "expected a polynomial in x"))
}

fn entry_word<'a>(e: &'a Entry) -> Result<&'a str, CoreError> {
    match &e.value {
        Value::Word(w) => Ok(w),
        _ => Err(entry_err(e, "expected a name")),
    }
}

fn as_rat(v: &Value) -> Option<Rat> {
    match v {
        Value::Number(r) => Some(r.clone()),
        _ => None,
    }
}

fn entry_rat_vec(e: &Entry) -> Result<Vec<Rat>, CoreError> {
    let Value::List(items) = &e.value else {
        return Err(entry_err(e, "expected a list of rationals"));
    };
    items
        .iter()
        .map(|v| as_rat(v).ok_or_else(|| entry_err(e, "expected a list of rationals")))
        .collect()
}

fn entry_qmatrix(e: &Entry) -> Result<QMatrix, CoreError> {
    let Value::List(rows) = &e.value else {
        return Err(entry_err(e, "expected a matrix as a list of rows"));
    };
    let mut data: Vec<Vec<Rat>> = Vec::with_capacity(rows.len());
    for row in rows {
        let Value::List(cells) = row else {
            return Err(entry_err(e, "expected a matrix as a list of rows"));
        };
        let r: Option<Vec<Rat>> = cells.iter().map(as_rat).collect();
        match r {
            Some(r) => data.push(r),
            None => return Err(entry_err(e, "matrix cells must be rationals")),
        }
    }
    let cols = data.first().map(|r| r.len()).unwrap_or(0);
    if data.iter().any(|r| r.len() != cols) {
        return Err(entry_err(e, "matrix rows have unequal lengths"));
    }
    Ok(QMatrix::from_rows(data))
}

fn entry_poly_rows(e: &Entry, cols: usize) -> Result<PolyMatrix, CoreError> {
    let Value::List(rows) = &e.value else {
        return Err(entry_err(e, "expected a list of relation rows"));
    };
    let mut out: Vec<Vec<Poly>> = Vec::with_capacity(rows.len());
    for row in rows {
        let Value::List(cells) = row else {
            return Err(entry_err(e, "each relation row must be a list"));
        };
        if cells.len() != cols {
            return Err(entry_err(
                e,
                format!("relation row has {} entries, expected {}", cells.len(), cols),
            ));
        }
        let r: Option<Vec<Poly>> = cells.iter().map(as_poly).collect();
        match r {
            Some(r) => out.push(r),
            None => return Err(entry_err(e, "relation entries must be polynomials")),
        }
    }
    Ok(PolyMatrix::from_rows(out))
}

fn entry_element(e: &Entry, gens: usize) -> Result<ModuleElement, CoreError> {
    match &e.value {
        Value::Number(r) if r == &rat_int(0) => Ok(ModuleElement::zero(gens)),
        Value::Element(terms) => {
            let mut coords = vec![Poly::zero(); gens];
            for (idx, c) in terms {
                if *idx >= gens {
                    return Err(entry_err(
                        e,
                        format!("generator e{} exceeds the module's {} generators", idx + 1, gens),
                    ));
                }
                coords[*idx] = c.clone();
            }
            Ok(ModuleElement::from_polys(coords))
        }
        other => {
            if gens == 1 {
                if let Some(p) = as_poly(other) {
                    return Ok(ModuleElement::from_polys(vec![p]));
                }
            }
            Err(entry_err(
                e,
                "expected a generator combination such as x*e1 - e2, or 0",
            ))
        }
    }
}

fn entry_usize_list(e: &Entry) -> Result<Vec<usize>, CoreError> {
    let Value::List(items) = &e.value else {
        return Err(entry_err(e, "expected a list of carrier dimensions"));
    };
    let mut out = Vec::with_capacity(items.len());
    for v in items {
        match v {
            Value::Number(r) if r.is_integer() => {
                let s = r.numer().to_string();
                out.push(
                    s.parse()
                        .map_err(|_| entry_err(e, "carrier dimension out of range"))?,
                );
            }
            _ => return Err(entry_err(e, "expected a list of nonnegative integers")),
        }
    }
    Ok(out)
}

fn check_keys(decl_line: usize, what: &str, entries: &[Entry], allowed: &[&str]) -> Result<(), CoreError> {
    for e in entries {
        let component_key = component_index(&e.key).is_some();
        if !component_key && !allowed.contains(&e.key.as_str()) {
            return Err(CoreError::MalformedLiteral(format!(
                "line {}: unknown key `{}` in {} (expected one of: {})",
                e.line,
                e.key,
                what,
                allowed.join(", ")
            )));
        }
        let _ = decl_line;
    }
    Ok(())
}

/// Renders a module element in generator notation (`x*e1 - e2`).
fn elem_str(v: &ModuleElement) -> String {
    let terms: Vec<(usize, Poly)> = v
        .coords
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_zero())
        .map(|(i, p)| (i, p.clone()))
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        crate::scenario::render_element(&terms)
    }
}

/// `D3` -> Some(3).
fn component_index(key: &str) -> Option<usize> {
    let rest = key.strip_prefix('D')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn require<'a>(entries: &'a [Entry], key: &str, line: usize, what: &str) -> Result<&'a Entry, CoreError> {
    find_entry(entries, key).ok_or_else(|| {
        CoreError::MalformedLiteral(format!("line {line}: {what} requires `{key} = ...`"))
    })
}

// ---------- environment ----------

#[derive(Default)]
struct Env {
    map: HashMap<String, Binding>,
}

impl Env {
    fn insert(&mut self, name: &str, binding: Binding) {
        self.map.insert(name.to_string(), binding);
    }

    fn resolve(&self, e: &Entry) -> Result<&Binding, CoreError> {
        let w = entry_word(e)?;
        self.map
            .get(w)
            .ok_or_else(|| CoreError::UnknownReference(format!("{w} (line {})", e.line)))
    }

    fn algebra(&self, e: &Entry) -> Result<&FinAlgebra, CoreError> {
        match self.resolve(e)? {
            Binding::Algebra(a) => Ok(a),
            other => Err(self.type_err(e, "algebra", other)),
        }
    }

    fn module(&self, e: &Entry) -> Result<&PresentedModule, CoreError> {
        match self.resolve(e)? {
            Binding::Module(m) => Ok(m),
            other => Err(self.type_err(e, "module", other)),
        }
    }

    fn filter(&self, e: &Entry) -> Result<&GabrielFilterSpec, CoreError> {
        match self.resolve(e)? {
            Binding::Filter(f) => Ok(f),
            other => Err(self.type_err(e, "filter", other)),
        }
    }

    fn ring_deriv(&self, e: &Entry) -> Result<&HigherRingDerivation, CoreError> {
        match self.resolve(e)? {
            Binding::RingDeriv(d) => Ok(d),
            other => Err(self.type_err(e, "ring derivation family", other)),
        }
    }

    fn nat_trans(&self, e: &Entry) -> Result<&QMatrix, CoreError> {
        match self.resolve(e)? {
            Binding::NatTrans(m) => Ok(m),
            other => Err(self.type_err(e, "natural transformation", other)),
        }
    }

    fn type_err(&self, e: &Entry, expected: &'static str, found: &Binding) -> CoreError {
        CoreError::BindingType {
            name: entry_word(e).unwrap_or("?").to_string(),
            expected,
            found: found.kind_name(),
        }
    }
}

// ---------- declaration elaboration ----------

fn declare_err(line: usize, name: &str, e: CoreError) -> CoreError {
    CoreError::InvalidArgument(format!("line {line}: declaring `{name}`: {e}"))
}

fn elaborate_decl(env: &mut Env, d: &Decl) -> Result<(), CoreError> {
    let binding = match d.kind {
        DeclKind::Config => return Ok(()),
        DeclKind::Algebra => {
            check_keys(d.line, "algebra", &d.entries, &["matrix", "poly_mod", "dim", "table", "unit"])?;
            if let Some(e) = find_entry(&d.entries, "matrix") {
                Binding::Algebra(FinAlgebra::matrix_algebra(as_usize(e)?))
            } else if let Some(e) = find_entry(&d.entries, "poly_mod") {
                let p = entry_poly(e)?;
                Binding::Algebra(
                    FinAlgebra::poly_quotient(&p).map_err(|er| declare_err(d.line, &d.name, er))?,
                )
            } else {
                let table_e = require(&d.entries, "table", d.line, "algebra")?;
                let unit_e = require(&d.entries, "unit", d.line, "algebra")?;
                let Value::List(rows) = &table_e.value else {
                    return Err(entry_err(table_e, "expected a nested list"));
                };
                let mut table: Vec<Vec<Vec<Rat>>> = Vec::new();
                for row in rows {
                    let Value::List(cells) = row else {
                        return Err(entry_err(table_e, "expected a nested list of products"));
                    };
                    let mut r: Vec<Vec<Rat>> = Vec::new();
                    for cell in cells {
                        let Value::List(vecv) = cell else {
                            return Err(entry_err(table_e, "each product must be a coefficient list"));
                        };
                        let v: Option<Vec<Rat>> = vecv.iter().map(as_rat).collect();
                        r.push(v.ok_or_else(|| entry_err(table_e, "coefficients must be rationals"))?);
                    }
                    table.push(r);
                }
                let unit = entry_rat_vec(unit_e)?;
                if let Some(e) = find_entry(&d.entries, "dim") {
                    if as_usize(e)? != table.len() {
                        return Err(entry_err(e, "dim disagrees with the table size"));
                    }
                }
                Binding::Algebra(
                    FinAlgebra::from_nested(table, unit)
                        .map_err(|er| declare_err(d.line, &d.name, er))?,
                )
            }
        }
        DeclKind::Module => {
            check_keys(d.line, "module", &d.entries, &["generators", "relations"])?;
            let gens = as_usize(require(&d.entries, "generators", d.line, "module")?)?;
            let relations = match find_entry(&d.entries, "relations") {
                Some(e) => entry_poly_rows(e, gens)?,
                None => PolyMatrix::empty(gens),
            };
            Binding::Module(
                PresentedModule::new(gens, relations)
                    .map_err(|er| declare_err(d.line, &d.name, er))?,
            )
        }
        DeclKind::Filter => {
            check_keys(d.line, "filter", &d.entries, &["f"])?;
            let f = entry_poly(require(&d.entries, "f", d.line, "filter")?)?;
            Binding::Filter(
                GabrielFilterSpec::new(&f).map_err(|er| declare_err(d.line, &d.name, er))?,
            )
        }
        DeclKind::Derivation => {
            check_keys(
                d.line,
                "derivation",
                &d.entries,
                &["type", "delta", "order", "of", "stride", "algebra", "element"],
            )?;
            let ty = entry_word(require(&d.entries, "type", d.line, "derivation")?)?;
            match ty {
                "exp" => {
                    let delta = entry_poly(require(&d.entries, "delta", d.line, "derivation type=exp")?)?;
                    let order = as_usize(require(&d.entries, "order", d.line, "derivation type=exp")?)?;
                    Binding::RingDeriv(
                        HigherRingDerivation::make_exp(
                            &OrdinaryRingDerivation::on_poly(delta),
                            order,
                        )
                        .map_err(|er| declare_err(d.line, &d.name, er))?,
                    )
                }
                "rescale" => {
                    let of = env
                        .ring_deriv(require(&d.entries, "of", d.line, "derivation type=rescale")?)?
                        .clone();
                    let stride =
                        as_usize(require(&d.entries, "stride", d.line, "derivation type=rescale")?)?;
                    Binding::RingDeriv(
                        of.make_rescaled(stride)
                            .map_err(|er| declare_err(d.line, &d.name, er))?,
                    )
                }
                "inner" => {
                    let alg = env
                        .algebra(require(&d.entries, "algebra", d.line, "derivation type=inner")?)?
                        .clone();
                    let elem =
                        entry_rat_vec(require(&d.entries, "element", d.line, "derivation type=inner")?)?;
                    let order = as_usize(require(&d.entries, "order", d.line, "derivation type=inner")?)?;
                    Binding::RingDeriv(
                        HigherRingDerivation::make_inner_higher(&alg, &elem, order)
                            .map_err(|er| declare_err(d.line, &d.name, er))?,
                    )
                }
                other => {
                    return Err(CoreError::MalformedLiteral(format!(
                        "line {}: unknown derivation type `{}` (expected exp, rescale, or inner)",
                        d.line, other
                    )))
                }
            }
        }
        DeclKind::HasseRing => {
            check_keys(d.line, "hasse ring", &d.entries, &["order", "on"])?;
            let order = as_usize(require(&d.entries, "order", d.line, "hasse ring")?)?;
            let on = require(&d.entries, "on", d.line, "hasse ring")?;
            let on_word = entry_word(on)?;
            if on_word == "Q[x]" {
                let mut gen_values = vec![Poly::zero(); order];
                for e in &d.entries {
                    if let Some(k) = component_index(&e.key) {
                        if e.arg.as_deref() != Some("x") {
                            return Err(entry_err(e, "component values are given at x, as D1(x) = ..."));
                        }
                        if k == 0 || k > order {
                            return Err(entry_err(e, format!("component {k} outside 1..={order}")));
                        }
                        gen_values[k - 1] = entry_poly(e)?;
                    }
                }
                Binding::RingDeriv(HigherRingDerivation::from_gen_values(gen_values))
            } else {
                let alg = env.algebra(on)?.clone();
                let dim = alg.dim();
                let mut comps = vec![QMatrix::zeros(dim, dim); order];
                for e in &d.entries {
                    if let Some(k) = component_index(&e.key) {
                        if e.arg.is_some() {
                            return Err(entry_err(e, "matrix components take no argument"));
                        }
                        if k == 0 || k > order {
                            return Err(entry_err(e, format!("component {k} outside 1..={order}")));
                        }
                        comps[k - 1] = entry_qmatrix(e)?;
                    }
                }
                Binding::RingDeriv(
                    HigherRingDerivation::from_matrices(alg, comps)
                        .map_err(|er| declare_err(d.line, &d.name, er))?,
                )
            }
        }
        DeclKind::HasseModule => {
            check_keys(d.line, "hasse module", &d.entries, &["order", "ring", "module"])?;
            let order = as_usize(require(&d.entries, "order", d.line, "hasse module")?)?;
            let ring = env
                .ring_deriv(require(&d.entries, "ring", d.line, "hasse module")?)?
                .clone();
            let module = env
                .module(require(&d.entries, "module", d.line, "hasse module")?)?
                .clone();
            let gens = module.generators();
            let mut images = vec![vec![ModuleElement::zero(gens); gens]; order];
            for e in &d.entries {
                if let Some(k) = component_index(&e.key) {
                    if k == 0 || k > order {
                        return Err(entry_err(e, format!("component {k} outside 1..={order}")));
                    }
                    let arg = e.arg.as_deref().ok_or_else(|| {
                        entry_err(e, "module components are given per generator, as D1(e1) = ...")
                    })?;
                    let j = arg
                        .strip_prefix('e')
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|j| (1..=gens).contains(j))
                        .ok_or_else(|| {
                            entry_err(e, format!("generator must be e1..e{gens}"))
                        })?;
                    images[k - 1][j - 1] = entry_element(e, gens)?;
                }
            }
            Binding::ModuleDeriv(
                HigherModuleDerivation::new(ring, module, images)
                    .map_err(|er| declare_err(d.line, &d.name, er))?,
            )
        }
        DeclKind::NatTrans => {
            check_keys(d.line, "nat-trans", &d.entries, &["matrix"])?;
            Binding::NatTrans(entry_qmatrix(require(&d.entries, "matrix", d.line, "nat-trans")?)?)
        }
    };
    env.insert(&d.name, binding);
    Ok(())
}

// ---------- command elaboration ----------

fn command_label(c: &Command) -> String {
    let mut label = c.kind.label().to_string();
    for e in &c.entries {
        if let Value::Word(w) = &e.value {
            if e.key == "diagram" {
                label = format!("check diagram={w}");
            } else {
                label.push_str(&format!(" {}={}", e.key, w));
            }
        }
    }
    label
}

fn elaborate_command(env: &Env, c: &Command, index: usize) -> Result<CommandJob, CoreError> {
    let line = c.line;
    let job = match c.kind {
        CommandKind::Validate => {
            check_keys(line, "validate", &c.entries, &["derivation"])?;
            let e = require(&c.entries, "derivation", line, "validate")?;
            match env.resolve(e)? {
                Binding::RingDeriv(d) => Job::ValidateRing(d.clone()),
                Binding::ModuleDeriv(d) => Job::ValidateModule(d.clone()),
                other => {
                    return Err(env.type_err(e, "derivation family", other));
                }
            }
        }
        CommandKind::Convert => {
            check_keys(line, "convert", &c.entries, &["derivation"])?;
            let e = require(&c.entries, "derivation", line, "convert")?;
            match env.resolve(e)? {
                Binding::RingDeriv(d) => Job::ConvertRing(d.clone()),
                Binding::ModuleDeriv(d) => Job::ConvertModule(d.clone()),
                other => {
                    return Err(env.type_err(e, "derivation family", other));
                }
            }
        }
        CommandKind::CheckDiagram => {
            let mode_e = require(&c.entries, "diagram", line, "check diagram")?;
            let mode = entry_word(mode_e)?;
            let carriers = match find_entry(&c.entries, "carriers") {
                Some(e) => entry_usize_list(e)?,
                None => vec![1, 2, 3],
            };
            match mode {
                "monad-laws" => {
                    check_keys(line, "check diagram=monad-laws", &c.entries, &["diagram", "algebra", "carriers"])?;
                    let algebra = env
                        .algebra(require(&c.entries, "algebra", line, "check diagram")?)?
                        .clone();
                    Job::DiagramMonadLaws { algebra, carriers }
                }
                "higher-deriv" => {
                    check_keys(
                        line,
                        "check diagram=higher-deriv",
                        &c.entries,
                        &["diagram", "algebra", "derivation", "family", "carriers"],
                    )?;
                    let algebra = env
                        .algebra(require(&c.entries, "algebra", line, "check diagram")?)?
                        .clone();
                    let components = if let Some(e) = find_entry(&c.entries, "derivation") {
                        let d = env.ring_deriv(e)?;
                        (1..=d.order())
                            .map(|k| d.component_matrix(k))
                            .collect::<Result<Vec<_>, _>>()?
                    } else {
                        let e = require(&c.entries, "family", line, "check diagram=higher-deriv")?;
                        family_matrices(env, e)?
                    };
                    Job::DiagramHigherDeriv {
                        algebra,
                        components,
                        carriers,
                    }
                }
                "module-deriv" => {
                    check_keys(
                        line,
                        "check diagram=module-deriv",
                        &c.entries,
                        &[
                            "diagram", "algebra", "columns", "free_rank", "action", "element",
                            "order", "ring_family", "family", "carriers",
                        ],
                    )?;
                    let algebra = env
                        .algebra(require(&c.entries, "algebra", line, "check diagram")?)?
                        .clone();
                    let module = if let Some(e) = find_entry(&c.entries, "columns") {
                        let n = as_usize(e)?;
                        EMModule::new(algebra.clone(), n, algebra.column_action(n))
                            .map_err(|er| entry_err(e, er))?
                    } else if let Some(e) = find_entry(&c.entries, "free_rank") {
                        EMModule::free(algebra.clone(), as_usize(e)?)
                    } else {
                        let e = require(&c.entries, "action", line, "check diagram=module-deriv")?;
                        let action = entry_qmatrix(e)?;
                        let m = action.rows();
                        EMModule::new(algebra.clone(), m, action).map_err(|er| entry_err(e, er))?
                    };
                    let (ring_components, module_components) =
                        if let Some(e) = find_entry(&c.entries, "element") {
                            let a = entry_rat_vec(e)?;
                            let order =
                                as_usize(require(&c.entries, "order", line, "check diagram=module-deriv")?)?;
                            module.make_module_power(&a, order).map_err(|er| entry_err(e, er))?
                        } else {
                            let re = require(&c.entries, "ring_family", line, "check diagram=module-deriv")?;
                            let me = require(&c.entries, "family", line, "check diagram=module-deriv")?;
                            (family_matrices(env, re)?, family_matrices(env, me)?)
                        };
                    Job::DiagramModuleDeriv {
                        module,
                        ring_components,
                        module_components,
                    }
                }
                other => {
                    return Err(entry_err(
                        mode_e,
                        format!("unknown diagram `{other}` (expected monad-laws, higher-deriv, or module-deriv)"),
                    ))
                }
            }
        }
        CommandKind::Torsion => {
            check_keys(line, "torsion", &c.entries, &["module", "filter"])?;
            Job::Torsion {
                module: env
                    .module(require(&c.entries, "module", line, "torsion")?)?
                    .clone(),
                filter: env
                    .filter(require(&c.entries, "filter", line, "torsion")?)?
                    .clone(),
            }
        }
        CommandKind::CheckThm48 => {
            check_keys(line, "check thm48", &c.entries, &["derivation", "filter", "catalog_bound"])?;
            let deriv = match env.resolve(require(&c.entries, "derivation", line, "check thm48")?)? {
                Binding::ModuleDeriv(d) => d.clone(),
                other => {
                    return Err(env.type_err(
                        require(&c.entries, "derivation", line, "check thm48")?,
                        "module derivation family",
                        other,
                    ))
                }
            };
            let catalog_bound = match find_entry(&c.entries, "catalog_bound") {
                Some(e) => as_usize(e)?,
                None => 3,
            };
            Job::Thm48 {
                deriv,
                filter: env
                    .filter(require(&c.entries, "filter", line, "check thm48")?)?
                    .clone(),
                catalog_bound,
            }
        }
        CommandKind::Quotient => {
            check_keys(line, "quotient", &c.entries, &["module", "filter"])?;
            Job::Quotient {
                module: env
                    .module(require(&c.entries, "module", line, "quotient")?)?
                    .clone(),
                filter: env
                    .filter(require(&c.entries, "filter", line, "quotient")?)?
                    .clone(),
            }
        }
        CommandKind::Extend => {
            check_keys(line, "extend", &c.entries, &["derivation", "filter", "witness_exponent"])?;
            let e = require(&c.entries, "derivation", line, "extend")?;
            let deriv = match env.resolve(e)? {
                Binding::ModuleDeriv(d) => d.clone(),
                other => return Err(env.type_err(e, "module derivation family", other)),
            };
            let witness_exponent = match find_entry(&c.entries, "witness_exponent") {
                Some(e) => Some(as_usize(e)?),
                None => None,
            };
            Job::Extend {
                deriv,
                filter: env
                    .filter(require(&c.entries, "filter", line, "extend")?)?
                    .clone(),
                witness_exponent,
            }
        }
        CommandKind::CheckThm55 => {
            check_keys(line, "check thm55", &c.entries, &["derivation", "filter"])?;
            let e = require(&c.entries, "derivation", line, "check thm55")?;
            let deriv = match env.resolve(e)? {
                Binding::ModuleDeriv(d) => d.clone(),
                other => return Err(env.type_err(e, "module derivation family", other)),
            };
            Job::Thm55 {
                deriv,
                filter: env
                    .filter(require(&c.entries, "filter", line, "check thm55")?)?
                    .clone(),
            }
        }
    };
    Ok(CommandJob {
        index,
        label: command_label(c),
        job,
    })
}

/// A `family = [...]` value: each item is a nat-trans reference or an
/// inline matrix.
fn family_matrices(env: &Env, e: &Entry) -> Result<Vec<QMatrix>, CoreError> {
    let Value::List(items) = &e.value else {
        return Err(entry_err(e, "expected a list of components"));
    };
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        match item {
            Value::Word(_) => {
                let fake = Entry {
                    key: e.key.clone(),
                    arg: None,
                    value: item.clone(),
                    line: e.line,
                    column: e.column,
                };
                out.push(env.nat_trans(&fake)?.clone());
            }
            Value::List(_) => {
                let fake = Entry {
                    key: e.key.clone(),
                    arg: None,
                    value: item.clone(),
                    line: e.line,
                    column: e.column,
                };
                out.push(entry_qmatrix(&fake)?);
            }
            _ => return Err(entry_err(e, "family items must be references or matrices")),
        }
    }
    Ok(out)
}

// ---------- elaboration entry points ----------

struct Elaborated {
    seed_from_config: Option<u64>,
    jobs: Vec<CommandJob>,
    decl_count: usize,
}

fn elaborate(scenario: &Scenario) -> Result<Elaborated, CoreError> {
    let mut env = Env::default();
    let mut jobs = Vec::new();
    let mut seed_from_config = None;
    let mut decl_count = 0;
    let mut index = 0;
    for item in &scenario.items {
        match item {
            Item::Decl(d) => {
                if d.kind == DeclKind::Config {
                    check_keys(d.line, "config", &d.entries, &["seed"])?;
                    if let Some(e) = find_entry(&d.entries, "seed") {
                        seed_from_config = Some(as_usize(e)? as u64);
                    }
                } else {
                    decl_count += 1;
                }
                elaborate_decl(&mut env, d)?;
            }
            Item::Command(c) => {
                index += 1;
                jobs.push(elaborate_command(&env, c, index)?);
            }
        }
    }
    Ok(Elaborated {
        seed_from_config,
        jobs,
        decl_count,
    })
}

/// Parse-and-resolve pass: elaborates every declaration and resolves
/// every command reference without running any check. Returns
/// `(declarations, commands)` on success.
pub fn check_scenario(scenario: &Scenario) -> Result<(usize, usize), CoreError> {
    let e = elaborate(scenario)?;
    Ok((e.decl_count, e.jobs.len()))
}

// ---------- execution ----------

const SEED_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn command_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64).wrapping_mul(SEED_GAMMA)
}

fn diagram_lines(what: &str, rep: &DiagramReport) -> (Status, Vec<String>) {
    if rep.pass {
        (
            Status::Pass,
            vec![format!("{}: pass ({} instances checked)", what, rep.checked)],
        )
    } else {
        let f = rep.failure.as_ref().expect("failing report has witness");
        (Status::Fail, vec![format!("{}: fail", what), f.render()])
    }
}

fn run_job(job: &Job, seed: u64) -> Result<(Status, Vec<String>), CoreError> {
    Ok(match job {
        Job::ValidateRing(d) => {
            let mut lines = vec![d.describe()];
            let cert = d.certificate();
            if !cert.pass {
                lines.push("construction certificate: fail".into());
                if let Some(cx) = &cert.counterexample {
                    lines.push(cx.render());
                }
                return Ok((Status::Fail, lines));
            }
            let rep = d.validate_higher_leibniz(seed);
            if rep.pass {
                lines.push("higher Leibniz chain: pass".into());
                (Status::Pass, lines)
            } else {
                lines.push("higher Leibniz chain: fail".into());
                if let Some(cx) = &rep.counterexample {
                    lines.push(cx.render());
                }
                (Status::Fail, lines)
            }
        }
        Job::ValidateModule(d) => {
            let mut lines = vec![d.describe()];
            let rep = d.validate(seed);
            if rep.pass {
                lines.push("well-definedness: certified".into());
                lines.push("module Leibniz chain: pass".into());
                (Status::Pass, lines)
            } else {
                if let Some(cx) = &rep.counterexample {
                    lines.push(cx.render());
                }
                (Status::Fail, lines)
            }
        }
        Job::ConvertRing(d) => {
            let seq = d.to_ordinary_sequence()?;
            let mut lines = Vec::new();
            for (i, stage) in seq.entries.iter().enumerate() {
                lines.push(format!("d{}: {}", i + 1, stage.render()));
            }
            let rebuilt = HigherRingDerivation::from_ordinary_sequence(&seq)?;
            let mut identical = true;
            for k in 1..=d.order() {
                let same = if d.is_poly_carrier() {
                    d.gen_value(k)? == rebuilt.gen_value(k)?
                } else {
                    d.component_matrix(k)? == rebuilt.component_matrix(k)?
                };
                if !same {
                    identical = false;
                    lines.push(format!("round trip differs at component {k}"));
                }
            }
            if identical {
                lines.push("round trip: identical".into());
                (Status::Pass, lines)
            } else {
                (Status::Fail, lines)
            }
        }
        Job::ConvertModule(d) => {
            let stages = d.to_ordinary_stages()?;
            let mut lines = Vec::new();
            for (i, stage) in stages.iter().enumerate() {
                let imgs: Vec<String> = stage
                    .images
                    .iter()
                    .enumerate()
                    .map(|(j, v)| format!("d{}(e{}) = {}", i + 1, j + 1, elem_str(v)))
                    .collect();
                lines.push(imgs.join("; "));
            }
            let rebuilt = HigherModuleDerivation::from_ordinary_stages(d.module().clone(), &stages)?;
            let mut identical = true;
            for k in 1..=d.order() {
                for j in 0..d.module().generators() {
                    if !d.module().elems_equal(&d.image(k, j), &rebuilt.image(k, j)) {
                        identical = false;
                        lines.push(format!("round trip differs at component {} on e{}", k, j + 1));
                    }
                }
            }
            if identical {
                lines.push("round trip: identical".into());
                (Status::Pass, lines)
            } else {
                (Status::Fail, lines)
            }
        }
        Job::DiagramMonadLaws { algebra, carriers } => {
            let r = MonadRealization::new(algebra.clone());
            diagram_lines("monad laws", &r.check_monad_laws(carriers))
        }
        Job::DiagramHigherDeriv {
            algebra,
            components,
            carriers,
        } => {
            let r = MonadRealization::new(algebra.clone());
            diagram_lines(
                "higher derivation diagram",
                &r.check_higher_derivation_diagram(components, carriers)?,
            )
        }
        Job::DiagramModuleDeriv {
            module,
            ring_components,
            module_components,
        } => {
            let r = MonadRealization::new(module.algebra().clone());
            let mut lines = Vec::new();
            let laws = module.validate();
            if !laws.pass {
                lines.push("module structure laws: fail".into());
                if let Some(f) = &laws.failure {
                    lines.push(f.render());
                }
                return Ok((Status::Fail, lines));
            }
            let (status, mut more) = diagram_lines(
                "module derivation diagram",
                &r.check_module_derivation_diagram(module, ring_components, module_components)?,
            );
            lines.append(&mut more);
            (status, lines)
        }
        Job::Torsion { module, filter } => {
            let dec = crate::torsion::torsion_submodule(module, filter);
            let polys = |ps: &[Poly]| {
                let inner: Vec<String> = ps.iter().map(|p| format!("{p}")).collect();
                format!("[{}]", inner.join(", "))
            };
            let lines = vec![
                format!("torsion invariant factors: {}", polys(dec.torsion_invariants())),
                format!("torsion dimension: {}", dec.torsion_qdim()),
                format!(
                    "annihilator exponents: [{}]",
                    dec.annihilator_exponents()
                        .iter()
                        .map(|e| e.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
                format!(
                    "quotient invariant factors: {}",
                    polys(&dec.quotient().invariant_factors())
                ),
                format!("quotient free rank: {}", dec.quotient().free_rank()),
            ];
            (Status::Pass, lines)
        }
        Job::Thm48 {
            deriv,
            filter,
            catalog_bound,
        } => {
            let rep = check_thm48_instance(deriv, filter, *catalog_bound)?;
            let mut lines = Vec::new();
            for c in &rep.conditions {
                lines.push(format!(
                    "condition {}: {} — {}",
                    c.name,
                    if c.holds { "holds" } else { "fails" },
                    c.detail
                ));
            }
            lines.push(format!(
                "all conditions agree: {}",
                if rep.agree { "yes" } else { "no" }
            ));
            (if rep.agree { Status::Pass } else { Status::Fail }, lines)
        }
        Job::Quotient { module, filter } => {
            let q = QuotientModule::build(module, filter);
            let polys = |ps: &[Poly]| {
                let inner: Vec<String> = ps.iter().map(|p| format!("{p}")).collect();
                format!("[{}]", inner.join(", "))
            };
            let mut lines = vec![
                format!(
                    "carrier invariant factors: {}",
                    polys(&q.carrier().invariant_factors())
                ),
                format!("carrier free rank: {}", q.carrier().free_rank()),
                format!(
                    "zero module: {}",
                    if q.is_zero_module() { "yes" } else { "no" }
                ),
            ];
            match q.kernel_matches_torsion() {
                Ok(()) => {
                    lines.push("kernel of the canonical map: matches the torsion part".into());
                    (Status::Pass, lines)
                }
                Err(e) => {
                    lines.push(format!("kernel certificate failed: {e}"));
                    (Status::Fail, lines)
                }
            }
        }
        Job::Extend {
            deriv,
            filter,
            witness_exponent,
        } => {
            let q = QuotientModule::build(deriv.module(), filter);
            let ext = match witness_exponent {
                Some(m) => extend_derivation_with_witness(
                    deriv,
                    &q,
                    &IdealSpec::principal(filter.f().pow(*m)),
                )?,
                None => extend_derivation(deriv, &q)?,
            };
            let mut lines = vec![format!(
                "invariance witness: {}",
                ext.invariance_witness().render()
            )];
            let val = ext.validate(seed)?;
            if !val.pass {
                lines.push("extension validation: fail".into());
                if let Some(w) = val.witness {
                    lines.push(w);
                }
                return Ok((Status::Fail, lines));
            }
            lines.push(format!("extension validation: pass ({} comparisons)", val.checked));
            // Sample lifts on the first carrier generator over f.
            if q.carrier().generators() > 0 && !q.is_zero_module() {
                let frac = LocalizedElement {
                    numerator: ModuleElement::unit(q.carrier().generators(), 0),
                    exponent: 1,
                };
                let lifts = ext.lift_all(&frac)?;
                for (k, l) in lifts.iter().enumerate().skip(1) {
                    let rendered = if l.exponent == 0 || l.numerator.is_zero_vector() {
                        elem_str(&l.numerator)
                    } else {
                        format!("{} / ({})^{}", elem_str(&l.numerator), q.f(), l.exponent)
                    };
                    lines.push(format!("component {} of e1/{}: {}", k, filter.f(), rendered));
                }
            }
            let enlarged_exp = deriv.order() + 3 + witness_exponent.unwrap_or(0);
            let enlarged = extend_derivation_with_witness(
                deriv,
                &q,
                &IdealSpec::principal(filter.f().pow(enlarged_exp)),
            )?;
            let uniq = verify_uniqueness(&ext, &enlarged)?;
            if uniq.pass {
                lines.push(format!(
                    "uniqueness under enlarged witness {}: identical ({} comparisons)",
                    enlarged.invariance_witness().render(),
                    uniq.checked
                ));
                (Status::Pass, lines)
            } else {
                lines.push("uniqueness under enlarged witness: differs".into());
                if let Some(w) = uniq.witness {
                    lines.push(w);
                }
                (Status::Fail, lines)
            }
        }
        Job::Thm55 { deriv, filter } => {
            let rep = check_thm55(deriv, filter, seed)?;
            let lines = vec![
                format!(
                    "forward: {} — {}",
                    if rep.forward.holds { "holds" } else { "fails" },
                    rep.forward.detail
                ),
                format!(
                    "converse: {} — {}",
                    if rep.converse.holds { "holds" } else { "fails" },
                    rep.converse.detail
                ),
            ];
            (if rep.pass { Status::Pass } else { Status::Fail }, lines)
        }
    })
}

fn execute_one(cj: &CommandJob, base_seed: u64, timing: bool) -> CommandOutcome {
    let started = std::time::Instant::now();
    let seed = command_seed(base_seed, cj.index);
    let (status, detail, code) = match run_job(&cj.job, seed) {
        Ok((status, detail)) => (status, detail, None),
        Err(e) => (Status::Error, vec![e.to_string()], Some(e.code().to_string())),
    };
    CommandOutcome {
        index: cj.index,
        label: cj.label.clone(),
        status,
        detail,
        code,
        timing_ms: timing.then(|| started.elapsed().as_millis() as u64),
    }
}

/// Runs a scenario. `Err` means the scenario itself is invalid
/// (declaration failed to build, reference unresolved); per-command
/// runtime failures land in the report instead.
pub fn run_scenario(scenario: &Scenario, flags: RunFlags) -> Result<Report, CoreError> {
    let elaborated = elaborate(scenario)?;
    let base_seed = flags.seed.or(elaborated.seed_from_config).unwrap_or(0);
    let mut outcomes: Vec<CommandOutcome> = Vec::with_capacity(elaborated.jobs.len());
    let mut aborted = false;
    if flags.parallel && !flags.fail_fast {
        let jobs = &elaborated.jobs;
        let mut slots: Vec<Option<CommandOutcome>> = Vec::new();
        slots.resize_with(jobs.len(), || None);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for cj in jobs {
                handles.push(scope.spawn(move || execute_one(cj, base_seed, flags.timing)));
            }
            for (slot, h) in slots.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("command worker panicked"));
            }
        });
        outcomes.extend(slots.into_iter().map(|s| s.expect("all slots filled")));
    } else {
        for cj in &elaborated.jobs {
            let outcome = execute_one(cj, base_seed, flags.timing);
            let stop = flags.fail_fast && outcome.status != Status::Pass;
            outcomes.push(outcome);
            if stop {
                aborted = true;
                break;
            }
        }
    }
    Ok(Report::new(base_seed, outcomes, aborted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn run_text(text: &str, flags: RunFlags) -> Report {
        let s = parse_scenario(text).unwrap();
        run_scenario(&s, flags).unwrap()
    }

    const GOLDEN_PIPELINE: &str = "\
config { seed = 7 }
derivation dx { type = exp, delta(x) = 1, order = 3 }
derivation rs { type = rescale, of = dx, stride = 4 }
module M { generators = 2, relations = [[x^3 - x^2, 0]] }
filter F { f = x }
hasse module D order=3 { ring = rs, module = M, D1(e2) = e1 }
validate { derivation = D }
torsion { module = M, filter = F }
check thm48 { derivation = D, filter = F }
quotient { module = M, filter = F }
extend { derivation = D, filter = F }
check thm55 { derivation = D, filter = F }
";

    #[test]
    fn golden_pipeline_passes_and_is_deterministic() {
        let flags = RunFlags::default();
        let r1 = run_text(GOLDEN_PIPELINE, flags);
        assert!(r1.all_passed(), "{}", r1.render_text(false));
        assert_eq!(r1.seed, 7);
        let r2 = run_text(GOLDEN_PIPELINE, flags);
        assert_eq!(r1.render_text(false), r2.render_text(false));
        assert_eq!(r1.to_json(), r2.to_json());
        // Parallel execution produces the identical report.
        let rp = run_text(
            GOLDEN_PIPELINE,
            RunFlags {
                parallel: true,
                ..flags
            },
        );
        assert_eq!(r1.render_text(false), rp.render_text(false));
        // Torsion lines carry the exact invariants.
        let torsion = &r1.commands[1];
        assert!(torsion.detail.iter().any(|l| l == "torsion invariant factors: [x^2]"));
        assert!(torsion.detail.iter().any(|l| l == "quotient invariant factors: [x - 1]"));
    }

    #[test]
    fn ring_validate_convert_and_diagrams() {
        let text = "\
algebra A { matrix = 2 }
derivation inner12 { type = inner, algebra = A, element = [0, 1, 0, 0], order = 4 }
derivation dx { type = exp, delta(x) = 1, order = 2 }
validate { derivation = inner12 }
validate { derivation = dx }
convert { derivation = dx }
check diagram=monad-laws { algebra = A }
check diagram=higher-deriv { algebra = A, derivation = inner12 }
check diagram=module-deriv { algebra = A, columns = 2, element = [0, 1, 0, 0], order = 4 }
";
        let r = run_text(text, RunFlags::default());
        assert!(r.all_passed(), "{}", r.render_text(false));
        assert!(r.commands[2]
            .detail
            .iter()
            .any(|l| l == "round trip: identical"));
    }

    #[test]
    fn negative_control_fails_with_exit_one_semantics() {
        // Matrix family that is not a higher derivation: zero second
        // component under a nonzero first.
        let text = "\
algebra A { matrix = 2 }
hasse ring bad order=2 on=A {
  D1 = [[0, 0, 0, 0], [0, 0, 1, 0], [0, -1, 0, 0], [0, 0, 0, 0]]
}
validate { derivation = bad }
";
        let r = run_text(text, RunFlags::default());
        assert!(!r.all_passed());
        assert_eq!(r.commands[0].status, Status::Fail);
        let joined = r.commands[0].detail.join("\n");
        assert!(joined.contains("k="), "{joined}");
    }

    #[test]
    fn extension_error_is_reported_not_fatal() {
        let text = "\
derivation dx { type = exp, delta(x) = 1, order = 1 }
module T { generators = 1, relations = [[x^2]] }
filter F { f = x }
hasse module D order=1 { ring = dx, module = T }
extend { derivation = D, filter = F }
torsion { module = T, filter = F }
";
        let r = run_text(text, RunFlags::default());
        assert_eq!(r.commands.len(), 2);
        assert_eq!(r.commands[0].status, Status::Error);
        assert_eq!(r.commands[0].code.as_deref(), Some("E013"));
        // The next command still ran.
        assert_eq!(r.commands[1].status, Status::Pass);
        // With fail-fast the run stops after the error.
        let rf = run_text(
            text,
            RunFlags {
                fail_fast: true,
                ..RunFlags::default()
            },
        );
        assert!(rf.aborted);
        assert_eq!(rf.commands.len(), 1);
    }

    #[test]
    fn scenario_level_errors() {
        let s = parse_scenario("validate { derivation = ghost }").unwrap();
        let err = run_scenario(&s, RunFlags::default()).unwrap_err();
        assert_eq!(err.code(), "E002");

        let s = parse_scenario("filter F { f = x }\nvalidate { derivation = F }").unwrap();
        let err = run_scenario(&s, RunFlags::default()).unwrap_err();
        assert_eq!(err.code(), "E003");

        let s = parse_scenario("module M { generators = 1 }\nmodule M2 { generators = 1, bogus = 3 }")
            .unwrap();
        let err = run_scenario(&s, RunFlags::default()).unwrap_err();
        assert_eq!(err.code(), "E015");
    }

    #[test]
    fn empty_scenario_empty_report() {
        let r = run_text("# nothing\n", RunFlags::default());
        assert!(r.all_passed());
        assert_eq!(r.summary.total, 0);
        assert_eq!(r.render_text(false), "hasse-report/1 seed=0\nsummary: total=0 passed=0 failed=0 errors=0\n");
    }

    #[test]
    fn seed_flag_overrides_config() {
        let r = run_text(
            "config { seed = 7 }\nderivation dx { type = exp, delta(x) = 1, order = 1 }\nvalidate { derivation = dx }",
            RunFlags {
                seed: Some(99),
                ..RunFlags::default()
            },
        );
        assert_eq!(r.seed, 99);
    }

    #[test]
    fn check_scenario_counts() {
        let s = parse_scenario(GOLDEN_PIPELINE).unwrap();
        let (decls, commands) = check_scenario(&s).unwrap();
        assert_eq!(decls, 5);
        assert_eq!(commands, 6);
    }

    #[test]
    fn extend_lift_lines_show_exact_fractions() {
        let text = "\
derivation dx { type = exp, delta(x) = 1, order = 2 }
module Free { generators = 1 }
filter F { f = x }
hasse module D order=2 { ring = dx, module = Free }
extend { derivation = D, filter = F }
";
        let r = run_text(text, RunFlags::default());
        assert!(r.all_passed(), "{}", r.render_text(false));
        let joined = r.commands[0].detail.join("\n");
        assert!(joined.contains("component 1 of e1/x: -e1 / (x)^2"), "{joined}");
        assert!(joined.contains("component 2 of e1/x: e1 / (x)^3"), "{joined}");
    }
}
