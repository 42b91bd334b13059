//! Tokenizer for scenario files. Every token carries its 1-based line
//! and column so that the first error in a file can always be pointed
//! at exactly.

use crate::error::CoreError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    /// Identifier, including hyphenated words like `nat-trans` and the
    /// special carrier name `Q[x]`.
    Ident(String),
    /// Unsigned digit run; numeric conversion happens in the parser.
    Int(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Equals,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Newline,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(s) => format!("`{s}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Equals => "`=`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::Newline => "end of line".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> CoreError {
    CoreError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Splits the input into positioned tokens. `#` starts a comment that
/// runs to the end of the line. A hyphen is absorbed into an identifier
/// only when the buffer so far is purely alphabetic of length at least
/// two and a letter follows, so `nat-trans` is one word while `x-1`
/// and `e1-e2` lex as subtractions.
pub fn lex(text: &str) -> Result<Vec<Token>, CoreError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1usize;
    let mut col = 1usize;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| {
            toks.push(Token {
                tok,
                line: tline,
                column: tcol,
            })
        };
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                push(Tok::Newline);
                i += 1;
                line += 1;
                col = 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
            }
            '{' => {
                push(Tok::LBrace);
                i += 1;
                col += 1;
            }
            '}' => {
                push(Tok::RBrace);
                i += 1;
                col += 1;
            }
            '[' => {
                push(Tok::LBracket);
                i += 1;
                col += 1;
            }
            ']' => {
                push(Tok::RBracket);
                i += 1;
                col += 1;
            }
            '(' => {
                push(Tok::LParen);
                i += 1;
                col += 1;
            }
            ')' => {
                push(Tok::RParen);
                i += 1;
                col += 1;
            }
            '=' => {
                push(Tok::Equals);
                i += 1;
                col += 1;
            }
            ',' => {
                push(Tok::Comma);
                i += 1;
                col += 1;
            }
            '+' => {
                push(Tok::Plus);
                i += 1;
                col += 1;
            }
            '-' => {
                push(Tok::Minus);
                i += 1;
                col += 1;
            }
            '*' => {
                push(Tok::Star);
                i += 1;
                col += 1;
            }
            '/' => {
                push(Tok::Slash);
                i += 1;
                col += 1;
            }
            '^' => {
                push(Tok::Caret);
                i += 1;
                col += 1;
            }
            d if d.is_ascii_digit() => {
                let mut s = String::new();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    i += 1;
                    col += 1;
                }
                push(Tok::Int(s));
            }
            a if a.is_ascii_alphabetic() || a == '_' => {
                let mut s = String::new();
                while i < chars.len() {
                    let c = chars[i];
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        i += 1;
                        col += 1;
                    } else if c == '-'
                        && s.len() >= 2
                        && s.chars().all(|ch| ch.is_ascii_alphabetic())
                        && i + 1 < chars.len()
                        && chars[i + 1].is_ascii_alphabetic()
                    {
                        s.push('-');
                        i += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                // The polynomial carrier is written `Q[x]`; fold it into
                // a single word so brackets stay reserved for lists.
                if s == "Q"
                    && i + 2 < chars.len()
                    && chars[i] == '['
                    && chars[i + 1] == 'x'
                    && chars[i + 2] == ']'
                {
                    s = "Q[x]".into();
                    i += 3;
                    col += 3;
                }
                push(Tok::Ident(s));
            }
            other => {
                return Err(err(line, col, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        lex(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn hyphen_absorption_rules() {
        assert_eq!(
            kinds("monad-laws nat-trans"),
            vec![
                Tok::Ident("monad-laws".into()),
                Tok::Ident("nat-trans".into())
            ]
        );
        assert_eq!(
            kinds("x-1"),
            vec![Tok::Ident("x".into()), Tok::Minus, Tok::Int("1".into())]
        );
        assert_eq!(
            kinds("e1-e2"),
            vec![
                Tok::Ident("e1".into()),
                Tok::Minus,
                Tok::Ident("e2".into())
            ]
        );
    }

    #[test]
    fn carrier_word_and_positions() {
        let toks = lex("on=Q[x]\n  f = x").unwrap();
        assert_eq!(toks[2].tok, Tok::Ident("Q[x]".into()));
        let f = &toks[4];
        assert_eq!(f.tok, Tok::Ident("f".into()));
        assert_eq!((f.line, f.column), (2, 3));
    }

    #[test]
    fn comments_and_bad_characters() {
        assert_eq!(kinds("# all gone\n"), vec![Tok::Newline]);
        let err = lex("a = $").unwrap_err();
        assert_eq!(err.code(), "E001");
        assert!(err.to_string().contains("column 5"));
    }
}
