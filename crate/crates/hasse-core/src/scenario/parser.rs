//! Recursive-descent parser from positioned tokens to the scenario
//! model. Entry values are parsed as expressions over `x` and the
//! generator symbols `e1, e2, ...`, then canonicalized into the `Value`
//! variants; a bare identifier that is neither is kept as a word
//! (references and mode names).

use std::collections::{BTreeMap, HashSet};
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::lexer::{Tok, Token};
use super::{Command, CommandKind, Decl, DeclKind, Entry, Item, Scenario, Value};
use crate::error::CoreError;
use crate::poly::Poly;
use crate::rat::Rat;

/// Evaluated expression: a scalar polynomial or a generator combination.
enum Ev {
    P(Poly),
    E(BTreeMap<usize, Poly>),
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> CoreError {
    CoreError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Parses a standalone polynomial expression (no element generators).
pub(super) fn parse_poly_expr(toks: &[Token]) -> Result<Poly, CoreError> {
    let mut p = Parser { toks, pos: 0 };
    p.skip_newlines();
    let value = p.parse_value()?;
    p.skip_newlines();
    if let Some(t) = p.cur() {
        return Err(err(
            t.line,
            t.column,
            format!("expected end of expression, found `{}`", t.tok.describe()),
        ));
    }
    match value {
        Value::Number(r) => Ok(Poly::constant(r)),
        Value::Poly(q) => Ok(q),
        other => Err(err(
            1,
            1,
            format!("expected a polynomial in x, got {}", other.kind_name()),
        )),
    }
}

pub(super) fn parse(toks: &[Token]) -> Result<Scenario, CoreError> {
    let mut p = Parser { toks, pos: 0 };
    let mut items = Vec::new();
    let mut names: HashSet<String> = HashSet::new();
    let mut config_seen = false;
    loop {
        p.skip_newlines();
        let Some(tok) = p.cur() else { break };
        let (line, column) = (tok.line, tok.column);
        let word = match &tok.tok {
            Tok::Ident(w) => w.clone(),
            other => {
                return Err(err(
                    line,
                    column,
                    format!("expected a declaration or command, found {}", other.describe()),
                ))
            }
        };
        match word.as_str() {
            "algebra" | "module" | "filter" | "derivation" | "nat-trans" | "hasse" | "config" => {
                let decl = p.parse_decl(&word)?;
                if decl.kind == DeclKind::Config {
                    if config_seen {
                        return Err(CoreError::InvalidArgument(format!(
                            "line {}: duplicate config block",
                            decl.line
                        )));
                    }
                    config_seen = true;
                } else if !names.insert(decl.name.clone()) {
                    return Err(CoreError::InvalidArgument(format!(
                        "line {}: duplicate name `{}`",
                        decl.line, decl.name
                    )));
                }
                items.push(Item::Decl(decl));
            }
            "validate" | "convert" | "torsion" | "quotient" | "extend" | "check" => {
                items.push(Item::Command(p.parse_command(&word)?));
            }
            other => {
                return Err(err(
                    line,
                    column,
                    format!("unknown item kind `{other}`"),
                ))
            }
        }
        p.expect_item_end()?;
    }
    Ok(Scenario { items })
}

impl<'a> Parser<'a> {
    fn cur(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_pos(&self) -> (usize, usize) {
        match self.toks.last() {
            Some(t) => (t.line, t.column + 1),
            None => (1, 1),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.cur().map(|t| &t.tok), Some(Tok::Newline)) {
            self.pos += 1;
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize), CoreError> {
        match self.bump() {
            Some(Token {
                tok: Tok::Ident(w),
                line,
                column,
            }) => Ok((w.clone(), *line, *column)),
            Some(t) => Err(err(
                t.line,
                t.column,
                format!("expected {what}, found {}", t.tok.describe()),
            )),
            None => {
                let (l, c) = self.end_pos();
                Err(err(l, c, format!("expected {what}, found end of input")))
            }
        }
    }

    fn expect_tok(&mut self, want: &Tok, what: &str) -> Result<&'a Token, CoreError> {
        match self.bump() {
            Some(t) if &t.tok == want => Ok(t),
            Some(t) => Err(err(
                t.line,
                t.column,
                format!("expected {what}, found {}", t.tok.describe()),
            )),
            None => {
                let (l, c) = self.end_pos();
                Err(err(l, c, format!("expected {what}, found end of input")))
            }
        }
    }

    /// After an item: newline(s) or end of input.
    fn expect_item_end(&mut self) -> Result<(), CoreError> {
        match self.cur() {
            None | Some(Token { tok: Tok::Newline, .. }) => Ok(()),
            Some(t) => Err(err(
                t.line,
                t.column,
                format!("expected end of line after item, found {}", t.tok.describe()),
            )),
        }
    }

    fn parse_decl(&mut self, word: &str) -> Result<Decl, CoreError> {
        let head = self.bump().expect("caller saw an ident");
        let line = head.line;
        let kind = match word {
            "algebra" => DeclKind::Algebra,
            "module" => DeclKind::Module,
            "filter" => DeclKind::Filter,
            "derivation" => DeclKind::Derivation,
            "nat-trans" => DeclKind::NatTrans,
            "config" => DeclKind::Config,
            "hasse" => {
                let (second, l2, c2) = self.expect_ident("`ring` or `module` after `hasse`")?;
                match second.as_str() {
                    "ring" => DeclKind::HasseRing,
                    "module" => DeclKind::HasseModule,
                    other => {
                        return Err(err(
                            l2,
                            c2,
                            format!("expected `ring` or `module` after `hasse`, found `{other}`"),
                        ))
                    }
                }
            }
            _ => unreachable!(),
        };
        let name = if kind == DeclKind::Config {
            String::new()
        } else {
            self.expect_ident("a name")?.0
        };
        let mut entries = self.parse_head_entries()?;
        if matches!(self.cur().map(|t| &t.tok), Some(Tok::LBrace)) {
            self.parse_block(&mut entries)?;
        }
        Ok(Decl {
            kind,
            name,
            entries,
            line,
        })
    }

    fn parse_command(&mut self, word: &str) -> Result<Command, CoreError> {
        let head = self.bump().expect("caller saw an ident");
        let line = head.line;
        let kind = match word {
            "validate" => CommandKind::Validate,
            "convert" => CommandKind::Convert,
            "torsion" => CommandKind::Torsion,
            "quotient" => CommandKind::Quotient,
            "extend" => CommandKind::Extend,
            "check" => match self.cur() {
                Some(Token {
                    tok: Tok::Ident(w), ..
                }) if w == "thm48" => {
                    self.bump();
                    CommandKind::CheckThm48
                }
                Some(Token {
                    tok: Tok::Ident(w), ..
                }) if w == "thm55" => {
                    self.bump();
                    CommandKind::CheckThm55
                }
                Some(Token {
                    tok: Tok::Ident(w), ..
                }) if w == "diagram" => CommandKind::CheckDiagram,
                Some(t) => {
                    return Err(err(
                        t.line,
                        t.column,
                        format!(
                            "expected `thm48`, `thm55`, or `diagram=...` after `check`, found {}",
                            t.tok.describe()
                        ),
                    ))
                }
                None => {
                    let (l, c) = self.end_pos();
                    return Err(err(l, c, "expected a check kind after `check`"));
                }
            },
            _ => unreachable!(),
        };
        let mut entries = self.parse_head_entries()?;
        if matches!(self.cur().map(|t| &t.tok), Some(Tok::LBrace)) {
            self.parse_block(&mut entries)?;
        }
        Ok(Command {
            kind,
            entries,
            line,
        })
    }

    /// `key = value` pairs between the item head and its block.
    fn parse_head_entries(&mut self) -> Result<Vec<Entry>, CoreError> {
        let mut entries = Vec::new();
        loop {
            let is_entry = match (self.cur().map(|t| &t.tok), self.toks.get(self.pos + 1)) {
                (Some(Tok::Ident(_)), Some(t1)) => {
                    matches!(t1.tok, Tok::Equals | Tok::LParen)
                }
                _ => false,
            };
            if !is_entry {
                break;
            }
            entries.push(self.parse_entry()?);
        }
        Ok(entries)
    }

    fn parse_block(&mut self, entries: &mut Vec<Entry>) -> Result<(), CoreError> {
        self.expect_tok(&Tok::LBrace, "`{`")?;
        loop {
            self.skip_newlines();
            match self.cur().map(|t| &t.tok) {
                Some(Tok::RBrace) => {
                    self.bump();
                    return Ok(());
                }
                None => {
                    let (l, c) = self.end_pos();
                    return Err(err(l, c, "unclosed `{` block"));
                }
                _ => {}
            }
            entries.push(self.parse_entry()?);
            match self.cur().map(|t| &t.tok) {
                Some(Tok::Comma) => {
                    self.bump();
                }
                Some(Tok::Newline) | Some(Tok::RBrace) => {}
                Some(_) => {
                    let t = self.cur().unwrap();
                    return Err(err(
                        t.line,
                        t.column,
                        format!(
                            "expected `,`, end of line, or `}}` after entry, found {}",
                            t.tok.describe()
                        ),
                    ));
                }
                None => {
                    let (l, c) = self.end_pos();
                    return Err(err(l, c, "unclosed `{` block"));
                }
            }
        }
    }

    fn parse_entry(&mut self) -> Result<Entry, CoreError> {
        let (key, line, column) = self.expect_ident("a key")?;
        let arg = if matches!(self.cur().map(|t| &t.tok), Some(Tok::LParen)) {
            self.bump();
            let (a, ..) = self.expect_ident("a key argument")?;
            self.expect_tok(&Tok::RParen, "`)`")?;
            Some(a)
        } else {
            None
        };
        self.expect_tok(&Tok::Equals, &format!("`=` after key `{key}`"))?;
        let value = self.parse_value()?;
        Ok(Entry {
            key,
            arg,
            value,
            line,
            column,
        })
    }


    fn parse_value(&mut self) -> Result<Value, CoreError> {
        match self.cur().map(|t| &t.tok) {
            Some(Tok::LBracket) => self.parse_list(),
            Some(Tok::Ident(w)) => {
                let w = w.clone();
                if w != "x" && gen_index(&w).is_none() {
                    // A bare identifier followed by a terminator is a
                    // word: a reference or a mode name.
                    let next_is_term = match self.toks.get(self.pos + 1).map(|t| &t.tok) {
                        None
                        | Some(
                            Tok::Comma
                                | Tok::Newline
                                | Tok::RBrace
                                | Tok::RBracket
                                | Tok::LBrace,
                        ) => true,
                        _ => false,
                    };
                    if next_is_term {
                        self.bump();
                        return Ok(Value::Word(w));
                    }
                }
                let ev = self.expr()?;
                self.finish_value(ev)
            }
            _ => {
                let ev = self.expr()?;
                self.finish_value(ev)
            }
        }
    }

    fn finish_value(&self, ev: Ev) -> Result<Value, CoreError> {
        Ok(match ev {
            Ev::P(p) => {
                if p.is_constant() {
                    Value::Number(p.coeff(0))
                } else {
                    Value::Poly(p)
                }
            }
            Ev::E(map) => {
                let terms: Vec<(usize, Poly)> = map
                    .into_iter()
                    .filter(|(_, c)| !c.is_zero())
                    .collect();
                if terms.is_empty() {
                    Value::Number(Rat::zero())
                } else {
                    Value::Element(terms)
                }
            }
        })
    }

    fn parse_list(&mut self) -> Result<Value, CoreError> {
        self.expect_tok(&Tok::LBracket, "`[`")?;
        let mut items = Vec::new();
        self.skip_newlines();
        if matches!(self.cur().map(|t| &t.tok), Some(Tok::RBracket)) {
            self.bump();
            return Ok(Value::List(items));
        }
        loop {
            self.skip_newlines();
            items.push(self.parse_value()?);
            self.skip_newlines();
            match self.bump() {
                Some(Token { tok: Tok::Comma, .. }) => continue,
                Some(Token {
                    tok: Tok::RBracket, ..
                }) => return Ok(Value::List(items)),
                Some(t) => {
                    return Err(err(
                        t.line,
                        t.column,
                        format!("expected `,` or `]` in list, found {}", t.tok.describe()),
                    ))
                }
                None => {
                    let (l, c) = self.end_pos();
                    return Err(err(l, c, "unclosed `[` list"));
                }
            }
        }
    }

    // Expression grammar: expr := term (('+'|'-') term)*;
    // term := unary (('*'|'/') unary)*; unary := ('-'|'+')* power;
    // power := atom ('^' Int)?; atom := Int | `x` | `eK` | '(' expr ')'.

    fn expr(&mut self) -> Result<Ev, CoreError> {
        let mut acc = self.term()?;
        loop {
            match self.cur().map(|t| &t.tok) {
                Some(Tok::Plus) => {
                    let op = self.bump().unwrap();
                    let rhs = self.term()?;
                    acc = ev_add(acc, rhs, op)?;
                }
                Some(Tok::Minus) => {
                    let op = self.bump().unwrap();
                    let rhs = self.term()?;
                    acc = ev_add(acc, ev_neg(rhs), op)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Ev, CoreError> {
        let mut acc = self.unary()?;
        loop {
            match self.cur().map(|t| &t.tok) {
                Some(Tok::Star) => {
                    let op = self.bump().unwrap();
                    let rhs = self.unary()?;
                    acc = ev_mul(acc, rhs, op)?;
                }
                Some(Tok::Slash) => {
                    let op = self.bump().unwrap();
                    let rhs = self.unary()?;
                    acc = ev_div(acc, rhs, op)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Ev, CoreError> {
        match self.cur().map(|t| &t.tok) {
            Some(Tok::Minus) => {
                self.bump();
                Ok(ev_neg(self.unary()?))
            }
            Some(Tok::Plus) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Ev, CoreError> {
        let base = self.atom()?;
        if !matches!(self.cur().map(|t| &t.tok), Some(Tok::Caret)) {
            return Ok(base);
        }
        let caret = self.bump().unwrap();
        let k = match self.cur() {
            Some(Token {
                tok: Tok::Int(s), ..
            }) => {
                let digits = s.clone();
                self.bump();
                digits.parse::<usize>().map_err(|_| {
                    err(caret.line, caret.column, "exponent is too large")
                })?
            }
            _ => {
                return Err(err(
                    caret.line,
                    caret.column,
                    "`^` must be followed by a nonnegative integer exponent",
                ))
            }
        };
        match base {
            Ev::P(p) => Ok(Ev::P(p.pow(k))),
            Ev::E(_) => Err(err(
                caret.line,
                caret.column,
                "cannot raise a generator combination to a power",
            )),
        }
    }

    fn atom(&mut self) -> Result<Ev, CoreError> {
        match self.bump() {
            Some(Token {
                tok: Tok::Int(s), ..
            }) => {
                let n = BigInt::from_str(s).expect("lexer produced digits");
                Ok(Ev::P(Poly::constant(Rat::from_integer(n))))
            }
            Some(Token {
                tok: Tok::Ident(w),
                line,
                column,
            }) => {
                if w == "x" {
                    Ok(Ev::P(Poly::x()))
                } else if let Some(idx) = gen_index(w) {
                    if idx == 0 {
                        return Err(err(
                            *line,
                            *column,
                            "module generators are numbered from e1",
                        ));
                    }
                    let mut map = BTreeMap::new();
                    map.insert(idx - 1, Poly::one());
                    Ok(Ev::E(map))
                } else {
                    Err(err(
                        *line,
                        *column,
                        format!("unknown symbol `{w}` in expression (only `x` and `eK` are defined)"),
                    ))
                }
            }
            Some(Token {
                tok: Tok::LParen, ..
            }) => {
                let inner = self.expr()?;
                self.expect_tok(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(t) => Err(err(
                t.line,
                t.column,
                format!("expected a value, found {}", t.tok.describe()),
            )),
            None => {
                let (l, c) = self.end_pos();
                Err(err(l, c, "expected a value, found end of input"))
            }
        }
    }
}

/// `e12` -> Some(12); anything else -> None.
fn gen_index(w: &str) -> Option<usize> {
    let rest = w.strip_prefix('e')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

fn ev_neg(ev: Ev) -> Ev {
    match ev {
        Ev::P(p) => Ev::P(&Poly::zero() - &p),
        Ev::E(map) => Ev::E(
            map.into_iter()
                .map(|(k, c)| (k, &Poly::zero() - &c))
                .collect(),
        ),
    }
}

fn ev_add(a: Ev, b: Ev, op: &Token) -> Result<Ev, CoreError> {
    match (a, b) {
        (Ev::P(p), Ev::P(q)) => Ok(Ev::P(&p + &q)),
        (Ev::E(mut m), Ev::E(n)) => {
            for (k, c) in n {
                let slot = m.entry(k).or_insert_with(Poly::zero);
                *slot = &*slot + &c;
            }
            Ok(Ev::E(m))
        }
        (Ev::P(p), Ev::E(m)) | (Ev::E(m), Ev::P(p)) if p.is_zero() => Ok(Ev::E(m)),
        _ => Err(err(
            op.line,
            op.column,
            "cannot add a scalar and a generator combination",
        )),
    }
}

fn ev_mul(a: Ev, b: Ev, op: &Token) -> Result<Ev, CoreError> {
    match (a, b) {
        (Ev::P(p), Ev::P(q)) => Ok(Ev::P(&p * &q)),
        (Ev::P(p), Ev::E(m)) | (Ev::E(m), Ev::P(p)) => Ok(Ev::E(
            m.into_iter().map(|(k, c)| (k, &c * &p)).collect(),
        )),
        (Ev::E(_), Ev::E(_)) => Err(err(
            op.line,
            op.column,
            "cannot multiply two generator combinations",
        )),
    }
}

fn ev_div(a: Ev, b: Ev, op: &Token) -> Result<Ev, CoreError> {
    let q = match b {
        Ev::P(q) => q,
        Ev::E(_) => {
            return Err(err(
                op.line,
                op.column,
                "cannot divide by a generator combination",
            ))
        }
    };
    if !q.is_constant() || q.is_zero() {
        return Err(err(
            op.line,
            op.column,
            "division is only defined by nonzero constants",
        ));
    }
    let inv = Rat::one() / q.coeff(0);
    match a {
        Ev::P(p) => Ok(Ev::P(p.scaled(&inv))),
        Ev::E(m) => Ok(Ev::E(
            m.into_iter().map(|(k, c)| (k, c.scaled(&inv))).collect(),
        )),
    }
}
