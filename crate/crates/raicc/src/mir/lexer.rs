//! Hand-rolled lexer for MIR source text.

use super::MirError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    /// `@site(...)` or `@synthetic(...)`; payload is the raw text between parens.
    Annotation { kind: String, value: String },
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Eq,
    Dot,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(text: &str) -> Result<Vec<Token>, MirError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! err {
        ($l:expr, $c:expr, $($arg:tt)*) => {
            return Err(MirError::Parse { line: $l, col: $c, message: format!($($arg)*) })
        };
    }

    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '/' => {
                bump(&mut chars);
                if chars.peek() == Some(&'/') {
                    while let Some(&n) = chars.peek() {
                        if n == '\n' {
                            break;
                        }
                        bump(&mut chars);
                    }
                } else {
                    err!(tline, tcol, "unexpected character '/'");
                }
            }
            '{' | '}' | '(' | ')' | ',' | ':' | '=' | '.' => {
                bump(&mut chars);
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '=' => Tok::Eq,
                    _ => Tok::Dot,
                };
                tokens.push(Token {
                    tok,
                    line: tline,
                    col: tcol,
                });
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match bump(&mut chars) {
                        None => err!(tline, tcol, "unterminated string literal"),
                        Some('"') => break,
                        Some('\\') => match bump(&mut chars) {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            other => err!(tline, tcol, "bad escape {:?}", other),
                        },
                        Some('\n') => err!(tline, tcol, "unterminated string literal"),
                        Some(ch) => s.push(ch),
                    }
                }
                tokens.push(Token {
                    tok: Tok::Str(s),
                    line: tline,
                    col: tcol,
                });
            }
            '@' => {
                bump(&mut chars);
                let mut kind = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        kind.push(n);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                if kind != "site" && kind != "synthetic" {
                    err!(tline, tcol, "unknown annotation '@{}'", kind);
                }
                if bump(&mut chars) != Some('(') {
                    err!(tline, tcol, "expected '(' after '@{}'", kind);
                }
                let mut value = String::new();
                loop {
                    match bump(&mut chars) {
                        None | Some('\n') => err!(tline, tcol, "unterminated '@{}'", kind),
                        Some(')') => break,
                        Some(ch) if ch.is_whitespace() => {
                            err!(tline, tcol, "whitespace inside '@{}'", kind)
                        }
                        Some(ch) => value.push(ch),
                    }
                }
                tokens.push(Token {
                    tok: Tok::Annotation { kind, value },
                    line: tline,
                    col: tcol,
                });
            }
            '-' | '0'..='9' => {
                let mut s = String::new();
                if c == '-' {
                    s.push('-');
                    bump(&mut chars);
                    match chars.peek() {
                        Some(d) if d.is_ascii_digit() => {}
                        _ => err!(tline, tcol, "expected digit after '-'"),
                    }
                }
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_digit() {
                        s.push(n);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                let v: i64 = match s.parse() {
                    Ok(v) => v,
                    Err(_) => err!(tline, tcol, "integer literal out of range: {}", s),
                };
                tokens.push(Token {
                    tok: Tok::Int(v),
                    line: tline,
                    col: tcol,
                });
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        s.push(n);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                tokens.push(Token {
                    tok: Tok::Ident(s),
                    line: tline,
                    col: tcol,
                });
            }
            other => err!(tline, tcol, "unexpected character {:?}", other),
        }
    }
    Ok(tokens)
}
