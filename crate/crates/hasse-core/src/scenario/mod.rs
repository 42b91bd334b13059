//! Scenario files: a small line-oriented language for declaring
//! algebras, modules, filters, and derivation families, and for listing
//! the checks to run against them.
//!
//! A file is a sequence of items. A declaration names an object:
//!
//! ```text
//! derivation d1 { type = exp, delta(x) = 1, order = 3 }
//! module M { generators = 2, relations = [[x^2*(x - 1), 0]] }
//! ```
//!
//! A command runs a check against earlier declarations (no forward
//! references):
//!
//! ```text
//! check thm55 { derivation = D, filter = F }
//! ```
//!
//! Keys may carry one argument (`delta(x)`, `D2(e1)`). Values are
//! rationals, polynomials in `x`, generator combinations (`x*e1 - e2`),
//! bare words (references and mode names), or bracketed lists. Entries
//! are separated by commas or line breaks; `#` comments to end of line.
//! Parsing is total: the first offending byte is reported with its line
//! and column. The pretty-printer emits a canonical form; parsing its
//! output yields the identical model.

mod lexer;
mod parser;

use crate::error::CoreError;
use crate::poly::Poly;
use crate::rat::{render_rat, Rat};

/// A parsed value, canonicalized: constants become `Number` even when
/// written as degree-zero polynomials, generator combinations with all
/// zero coefficients collapse to `Number(0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Number(Rat),
    Poly(Poly),
    /// Linear combination of module generators: sorted, nonzero
    /// `(generator index, coefficient)` pairs; `e1` has index 0.
    Element(Vec<(usize, Poly)>),
    Word(String),
    List(Vec<Value>),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Number(_) => "a number",
            Value::Poly(_) => "a polynomial",
            Value::Element(_) => "a generator combination",
            Value::Word(_) => "a name",
            Value::List(_) => "a list",
        }
    }
}

/// One `key = value` binding, optionally with a key argument as in
/// `delta(x) = 1` or `D2(e1) = x*e2`.
#[derive(Clone, Debug)]
pub struct Entry {
    pub key: String,
    pub arg: Option<String>,
    pub value: Value,
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.arg == other.arg && self.value == other.value
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeclKind {
    Algebra,
    Module,
    Filter,
    Derivation,
    HasseRing,
    HasseModule,
    NatTrans,
    Config,
}

impl DeclKind {
    pub fn keyword(&self) -> &'static str {
        match self {
            DeclKind::Algebra => "algebra",
            DeclKind::Module => "module",
            DeclKind::Filter => "filter",
            DeclKind::Derivation => "derivation",
            DeclKind::HasseRing => "hasse ring",
            DeclKind::HasseModule => "hasse module",
            DeclKind::NatTrans => "nat-trans",
            DeclKind::Config => "config",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub kind: DeclKind,
    /// Empty for `config`, which is anonymous.
    pub name: String,
    pub entries: Vec<Entry>,
    pub line: usize,
}

impl PartialEq for Decl {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name && self.entries == other.entries
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Convert,
    CheckDiagram,
    CheckThm48,
    CheckThm55,
    Torsion,
    Quotient,
    Extend,
}

impl CommandKind {
    pub fn label(&self) -> &'static str {
        match self {
            CommandKind::Validate => "validate",
            CommandKind::Convert => "convert",
            CommandKind::CheckDiagram => "check diagram",
            CommandKind::CheckThm48 => "check thm48",
            CommandKind::CheckThm55 => "check thm55",
            CommandKind::Torsion => "torsion",
            CommandKind::Quotient => "quotient",
            CommandKind::Extend => "extend",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Command {
    pub kind: CommandKind,
    pub entries: Vec<Entry>,
    pub line: usize,
}

impl PartialEq for Command {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.entries == other.entries
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Decl(Decl),
    Command(Command),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Scenario {
    pub items: Vec<Item>,
}

impl Scenario {
    pub fn decls(&self) -> impl Iterator<Item = &Decl> {
        self.items.iter().filter_map(|i| match i {
            Item::Decl(d) => Some(d),
            _ => None,
        })
    }

    pub fn commands(&self) -> impl Iterator<Item = &Command> {
        self.items.iter().filter_map(|i| match i {
            Item::Command(c) => Some(c),
            _ => None,
        })
    }
}

/// Finds an entry by key (first match, no argument constraint).
pub fn find_entry<'a>(entries: &'a [Entry], key: &str) -> Option<&'a Entry> {
    entries.iter().find(|e| e.key == key)
}

/// Parses scenario text into a model, or reports the first error with
/// its position.
/// Parses a standalone polynomial expression such as `x^2 - 1/3`.
pub fn parse_poly(text: &str) -> Result<Poly, CoreError> {
    parser::parse_poly_expr(&lexer::lex(text)?)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, CoreError> {
    parser::parse(&lexer::lex(text)?)
}

pub(crate) fn render_element(terms: &[(usize, Poly)]) -> String {
    let mut out = String::new();
    for (idx, coeff) in terms {
        let gen = format!("e{}", idx + 1);
        let piece = if coeff.is_one() {
            gen
        } else if (&Poly::zero() - coeff).is_one() {
            format!("-{gen}")
        } else {
            let rs = format!("{coeff}");
            if rs.contains(' ') || rs.starts_with('-') {
                format!("({rs})*{gen}")
            } else {
                format!("{rs}*{gen}")
            }
        };
        if out.is_empty() {
            out = piece;
        } else if let Some(rest) = piece.strip_prefix('-') {
            out = format!("{out} - {rest}");
        } else {
            out = format!("{out} + {piece}");
        }
    }
    out
}

pub fn render_value(v: &Value) -> String {
    match v {
        Value::Number(r) => render_rat(r),
        Value::Poly(p) => format!("{p}"),
        Value::Element(terms) => render_element(terms),
        Value::Word(w) => w.clone(),
        Value::List(items) => {
            let inner: Vec<String> = items.iter().map(render_value).collect();
            format!("[{}]", inner.join(", "))
        }
    }
}

fn render_entry(e: &Entry) -> String {
    match &e.arg {
        Some(a) => format!("{}({}) = {}", e.key, a, render_value(&e.value)),
        None => format!("{} = {}", e.key, render_value(&e.value)),
    }
}

fn render_block(entries: &[Entry], out: &mut String) {
    if entries.is_empty() {
        out.push_str(" {}\n");
        return;
    }
    out.push_str(" {\n");
    for (i, e) in entries.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&render_entry(e));
        if i + 1 < entries.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("}\n");
}

/// Canonical form: one item per paragraph, every entry inside the
/// block, two-space indent. Feeding the output back through
/// `parse_scenario` reproduces the model exactly.
pub fn pretty(s: &Scenario) -> String {
    let mut out = String::new();
    for (i, item) in s.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Decl(d) => {
                out.push_str(d.kind.keyword());
                if !d.name.is_empty() {
                    out.push(' ');
                    out.push_str(&d.name);
                }
                render_block(&d.entries, &mut out);
            }
            Item::Command(c) => {
                // `check diagram` keeps its selector as a head pair so
                // the parser can classify the command before the block.
                if c.kind == CommandKind::CheckDiagram
                    && c.entries.first().is_some_and(|e| e.key == "diagram")
                {
                    out.push_str("check ");
                    out.push_str(&render_entry(&c.entries[0]));
                    render_block(&c.entries[1..], &mut out);
                } else {
                    out.push_str(c.kind.label());
                    render_block(&c.entries, &mut out);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_int;

    fn roundtrip(text: &str) -> Scenario {
        let first = parse_scenario(text).unwrap();
        let printed = pretty(&first);
        let second = parse_scenario(&printed).unwrap_or_else(|e| {
            panic!("canonical form failed to parse: {e}\n{printed}");
        });
        assert_eq!(first, second, "model changed through printing:\n{printed}");
        first
    }

    #[test]
    fn minimal_exp_declaration() {
        let s = roundtrip("derivation d1 { type=exp, delta(x)=1, order=3 }");
        let d = s.decls().next().unwrap();
        assert_eq!(d.kind, DeclKind::Derivation);
        assert_eq!(d.name, "d1");
        assert_eq!(d.entries.len(), 3);
        assert_eq!(d.entries[0].value, Value::Word("exp".into()));
        assert_eq!(d.entries[1].key, "delta");
        assert_eq!(d.entries[1].arg.as_deref(), Some("x"));
        assert_eq!(d.entries[1].value, Value::Number(rat_int(1)));
        assert_eq!(d.entries[2].value, Value::Number(rat_int(3)));
    }

    #[test]
    fn head_pairs_fold_into_block() {
        let s = roundtrip("hasse ring r1 order=2 on=Q[x] {\n  D1(x) = x^2 + 1\n  D2(x) = 3/2*x\n}");
        let d = s.decls().next().unwrap();
        assert_eq!(d.kind, DeclKind::HasseRing);
        assert_eq!(d.entries[0].key, "order");
        assert_eq!(d.entries[1].value, Value::Word("Q[x]".into()));
        match &d.entries[2].value {
            Value::Poly(p) => assert_eq!(format!("{p}"), "x^2 + 1"),
            other => panic!("expected poly, got {other:?}"),
        }
    }

    #[test]
    fn elements_lists_and_commands() {
        let text = "module M { generators = 2, relations = [[x^2*(x - 1), 0]] }\n\
                    hasse module D order=1 { ring = r, module = M, D1(e2) = x*e1 - 2*e2 }\n\
                    check thm48 { derivation = D, filter = F }\n\
                    torsion { module = M, filter = F }";
        let s = roundtrip(text);
        assert_eq!(s.commands().count(), 2);
        let hm = s.decls().nth(1).unwrap();
        assert_eq!(hm.entries[2].value, Value::Word("M".into()));
        match &hm.entries[3].value {
            Value::Element(terms) => {
                assert_eq!(terms.len(), 2);
                assert_eq!(terms[0].0, 0);
                assert_eq!(format!("{}", terms[0].1), "x");
                assert_eq!(format!("{}", terms[1].1), "-2");
            }
            other => panic!("expected element, got {other:?}"),
        }
        let kinds: Vec<CommandKind> = s.commands().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![CommandKind::CheckThm48, CommandKind::Torsion]);
        // Relation rows keep polynomial entries exact.
        let m = s.decls().next().unwrap();
        match &m.entries[1].value {
            Value::List(rows) => match &rows[0] {
                Value::List(cells) => {
                    match &cells[0] {
                        Value::Poly(p) => assert_eq!(format!("{p}"), "x^3 - x^2"),
                        other => panic!("expected poly, got {other:?}"),
                    }
                    assert_eq!(cells[1], Value::Number(rat_int(0)));
                }
                other => panic!("expected row list, got {other:?}"),
            },
            other => panic!("expected list, got {other:?}"),
        }
    }

    #[test]
    fn caret_error_position() {
        let err = parse_scenario("filter F { f = x^ }").unwrap_err();
        assert_eq!(err.code(), "E001");
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
        assert!(msg.contains("column 17"), "{msg}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = parse_scenario("filter F { f = x }\nfilter F { f = x }").unwrap_err();
        assert_eq!(err.code(), "E014");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn empty_scenario_and_comments() {
        let s = parse_scenario("# nothing here\n\n").unwrap();
        assert!(s.items.is_empty());
        assert_eq!(pretty(&s), "");
    }

    #[test]
    fn check_diagram_head_entry() {
        let s = roundtrip(
            "algebra A { matrix = 2 }\ncheck diagram=monad-laws { algebra = A, carriers = [1, 2, 3] }",
        );
        let c = s.commands().next().unwrap();
        assert_eq!(c.kind, CommandKind::CheckDiagram);
        assert_eq!(c.entries[0].key, "diagram");
        assert_eq!(c.entries[0].value, Value::Word("monad-laws".into()));
    }

    #[test]
    fn expression_forms() {
        let s = roundtrip(
            "hasse module D order=2 {\n  D1(e1) = (x^2 - 1/3)*e2 + 4*e1,\n  D2(e1) = -e1\n}",
        );
        let d = s.decls().next().unwrap();
        match &d.entries[1].value {
            Value::Element(terms) => {
                assert_eq!(format!("{}", terms[0].1), "4");
                assert_eq!(format!("{}", terms[1].1), "x^2 - 1/3");
            }
            other => panic!("expected element, got {other:?}"),
        }
        match &d.entries[2].value {
            Value::Element(terms) => assert_eq!(format!("{}", terms[0].1), "-1"),
            other => panic!("expected element, got {other:?}"),
        }
    }

    #[test]
    fn zero_element_collapses_to_number() {
        let s = parse_scenario("hasse module D order=1 { D1(e1) = 0*e1 }").unwrap();
        let d = s.decls().next().unwrap();
        assert_eq!(d.entries[1].value, Value::Number(rat_int(0)));
    }

    #[test]
    fn unknown_symbol_reported() {
        let err = parse_scenario("filter F { f = 2*y }").unwrap_err();
        assert_eq!(err.code(), "E001");
        assert!(err.to_string().contains("`y`"));
    }

    #[test]
    fn standalone_poly_expressions() {
        assert_eq!(format!("{}", parse_poly("(x + 1)*(x - 1)").unwrap()), "x^2 - 1");
        assert_eq!(format!("{}", parse_poly("3/2").unwrap()), "3/2");
        assert_eq!(parse_poly("e1 + e2").unwrap_err().code(), "E001");
        assert_eq!(parse_poly("x^2 +").unwrap_err().code(), "E001");
        assert!(parse_poly("x x").unwrap_err().to_string().contains("end of expression"));
    }
}
