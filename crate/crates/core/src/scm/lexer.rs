use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Diagnostic, Pos};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Directive(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Tilde,
    Equals,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Number(x) => format!("number `{x}`"),
            Tok::Directive(d) => format!("directive `@{d}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Equals => "`=`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokenizes one source line. Comments run from `#` to the end of the line.
pub(crate) fn lex_line(line: &str, line_no: usize) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos::new(line_no, i + 1);
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '~' => Some(Tok::Tilde),
            '=' => Some(Tok::Equals),
            _ => None,
        };
        if let Some(tok) = single {
            tokens.push(Token { tok, pos });
            i += 1;
            continue;
        }
        if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            tokens.push(Token { tok: Tok::Ident(name), pos });
            continue;
        }
        if c == '@' {
            i += 1;
            let start = i;
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
            if start == i {
                return Err(Diagnostic::error("expected directive name after `@`", pos));
            }
            let name: String = chars[start..i].iter().collect();
            tokens.push(Token { tok: Tok::Directive(name), pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                } else {
                    return Err(Diagnostic::error("malformed exponent in number", Pos::new(line_no, i + 1)));
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| Diagnostic::error(format!("malformed number `{text}`"), pos))?;
            if !value.is_finite() {
                return Err(Diagnostic::error(format!("number `{text}` is out of range"), pos));
            }
            tokens.push(Token { tok: Tok::Number(value), pos });
            continue;
        }
        return Err(Diagnostic::error(format!("unexpected character `{}`", c.escape_debug()), pos));
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex_line(s, 1).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn lexes_numbers_and_identifiers() {
        assert_eq!(
            toks("eX_1 = 2.5e-1*.5 # trailing"),
            vec![Tok::Ident("eX_1".into()), Tok::Equals, Tok::Number(0.25), Tok::Star, Tok::Number(0.5),]
        );
        assert_eq!(toks("@outcome Y"), vec![Tok::Directive("outcome".into()), Tok::Ident("Y".into())]);
    }

    #[test]
    fn reports_bad_characters_with_column() {
        let err = lex_line("X = 2 $ 3", 4).unwrap_err();
        assert_eq!((err.line, err.column), (4, 7));
        assert!(lex_line("X = 1e", 1).is_err());
        assert!(lex_line("X = 1e999", 1).is_err());
        assert!(lex_line("X = é", 1).is_err());
    }
}
