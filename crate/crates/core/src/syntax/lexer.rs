use crate::error::{Error, Result};
use crate::value::{parse_number, Number};

use super::{Cmp, ContainKind, ContainMode, ContainOp, RelOp};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(Number),
    Str(String),
    Plus,
    Minus,
    Star,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Amp,
    Tilde,
    Bar,
    Rel(RelOp),
    /// Only the fused forms; plain `has`/`in` stay identifiers.
    Contain(ContainOp),
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => single(&mut i, Tok::Plus),
            b'*' => single(&mut i, Tok::Star),
            b'.' => single(&mut i, Tok::Dot),
            b'(' => single(&mut i, Tok::LParen),
            b')' => single(&mut i, Tok::RParen),
            b'{' => single(&mut i, Tok::LBrace),
            b'}' => single(&mut i, Tok::RBrace),
            b',' => single(&mut i, Tok::Comma),
            b'&' => single(&mut i, Tok::Amp),
            b'|' => single(&mut i, Tok::Bar),
            b'<' | b'>' | b'=' => {
                let cmp = relop_at(bytes, &mut i);
                Tok::Rel(RelOp::plain(cmp))
            }
            b'~' => {
                i += 1;
                if matches!(bytes.get(i), Some(b'<' | b'>' | b'=')) {
                    Tok::Rel(RelOp::tilde(relop_at(bytes, &mut i)))
                } else if bytes.get(i) == Some(&b'-') {
                    match keyword_at(bytes, i + 1) {
                        Some((kind, len)) => {
                            i += 1 + len;
                            Tok::Contain(ContainOp {
                                kind,
                                mode: ContainMode::ComplementQuasi,
                            })
                        }
                        None => Tok::Tilde,
                    }
                } else if let Some((kind, len)) = keyword_at(bytes, i) {
                    i += len;
                    Tok::Contain(ContainOp {
                        kind,
                        mode: ContainMode::Complement,
                    })
                } else {
                    Tok::Tilde
                }
            }
            b'-' => {
                if let Some((kind, len)) = keyword_at(bytes, i + 1) {
                    i += 1 + len;
                    Tok::Contain(ContainOp {
                        kind,
                        mode: ContainMode::Quasi,
                    })
                } else if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                    i += 1;
                    let n = number_at(src, &mut i, start)?;
                    Tok::Number(-n)
                } else {
                    single(&mut i, Tok::Minus)
                }
            }
            b'0'..=b'9' => Tok::Number(number_at(src, &mut i, start)?),
            b'"' => Tok::Str(string_at(src, &mut i)?),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(src[start..i].to_string())
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(Error::UnknownOperator {
                    op: ch.to_string(),
                    position: i,
                });
            }
        };
        out.push(Token { tok, pos: start });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: src.len(),
    });
    Ok(out)
}

fn single(i: &mut usize, t: Tok) -> Tok {
    *i += 1;
    t
}

fn relop_at(bytes: &[u8], i: &mut usize) -> Cmp {
    let c = bytes[*i];
    *i += 1;
    let eq = bytes.get(*i) == Some(&b'=');
    match c {
        b'<' if eq => {
            *i += 1;
            Cmp::Le
        }
        b'>' if eq => {
            *i += 1;
            Cmp::Ge
        }
        b'<' => Cmp::Lt,
        b'>' => Cmp::Gt,
        _ => Cmp::Eq,
    }
}

/// `has` or `in` starting at `i` and ending at a word boundary.
fn keyword_at(bytes: &[u8], i: usize) -> Option<(ContainKind, usize)> {
    for (word, kind) in [("has", ContainKind::Has), ("in", ContainKind::In)] {
        let end = i + word.len();
        if bytes.get(i..end) == Some(word.as_bytes())
            && !bytes
                .get(end)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
        {
            return Some((kind, word.len()));
        }
    }
    None
}

fn number_at(src: &str, i: &mut usize, start: usize) -> Result<Number> {
    let bytes = src.as_bytes();
    let digits_from = *i;
    let eat_digits = |i: &mut usize| {
        let s = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > s
    };
    eat_digits(i);
    if bytes.get(*i) == Some(&b'.') && bytes.get(*i + 1).is_some_and(u8::is_ascii_digit) {
        *i += 1;
        eat_digits(i);
    } else if bytes.get(*i) == Some(&b'/') {
        *i += 1;
        if !eat_digits(i) {
            return Err(Error::syntax(*i, "expected digits after `/`"));
        }
    }
    parse_number(&src[digits_from..*i])
        .ok_or_else(|| Error::syntax(start, format!("invalid number `{}`", &src[start..*i])))
}

fn string_at(src: &str, i: &mut usize) -> Result<String> {
    let start = *i;
    let mut out = String::new();
    let mut chars = src[*i + 1..].char_indices();
    while let Some((off, c)) = chars.next() {
        match c {
            '"' => {
                *i = start + 1 + off + 1;
                return Ok(out);
            }
            '\\' => match chars.next() {
                Some((_, '"')) => out.push('"'),
                Some((_, '\\')) => out.push('\\'),
                Some((_, 'n')) => out.push('\n'),
                Some((_, 't')) => out.push('\t'),
                Some((o, other)) => {
                    return Err(Error::syntax(
                        start + 1 + o,
                        format!("unknown escape `\\{other}`"),
                    ))
                }
                None => break,
            },
            c => out.push(c),
        }
    }
    Err(Error::syntax(start, "unterminated string literal"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn tilde_fuses_only_when_adjacent() {
        assert_eq!(toks("age~>5")[1], Tok::Rel(RelOp::tilde(Cmp::Gt)));
        assert_eq!(toks("age ~ > 5")[1], Tok::Tilde);
        assert_eq!(toks("~(x)")[0], Tok::Tilde);
        assert_eq!(
            toks("a ~-has {1}")[1],
            Tok::Contain(ContainOp {
                kind: ContainKind::Has,
                mode: ContainMode::ComplementQuasi
            })
        );
        // `~hasty` is a negated identifier, not a fused operator.
        assert_eq!(toks("~hasty")[0], Tok::Tilde);
    }

    #[test]
    fn minus_forms() {
        assert_eq!(toks("a-b")[1], Tok::Minus);
        assert_eq!(toks("x>-5")[2], Tok::Number(parse_number("-5").unwrap()));
        assert_eq!(
            toks("x -in {1}")[1],
            Tok::Contain(ContainOp {
                kind: ContainKind::In,
                mode: ContainMode::Quasi
            })
        );
    }

    #[test]
    fn strings_and_unknown_chars() {
        assert_eq!(toks(r#""a\"b""#)[0], Tok::Str("a\"b".into()));
        assert!(matches!(
            tokenize("a ! b"),
            Err(Error::UnknownOperator { position: 2, .. })
        ));
        assert!(matches!(tokenize("\"abc"), Err(Error::Syntax { .. })));
    }
}
