//! Polynomial expressions with rational coefficients: parsing and printing.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary ("*" unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" uint)?
//! atom   := var | uint | uint "/" uint | "(" expr ")"
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::pseries::{format_rational, Rational, TruncatedSeries, VarContext};

/// Largest accepted literal exponent.
pub const MAX_EXPONENT: u32 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent too large at byte {offset} (max {MAX_EXPONENT})")]
    ExponentOverflow { offset: usize },
    #[error("missing `;` between the two components of the map")]
    MissingSeparator,
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::ExponentOverflow { offset } => Some(*offset),
            ParseError::MissingSeparator => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    base: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str, base: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0, base };
        let mut out = Vec::new();
        loop {
            let (t, at) = lx.next()?;
            let end = t == Tok::End;
            out.push((t, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let at = self.base + start;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, at));
        };
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos < bytes.len() && bytes[self.pos] == b'.' {
                    return Err(ParseError::Syntax {
                        offset: self.base + self.pos,
                        message: "decimal literals are not accepted; use p/q".into(),
                    });
                }
                let n: BigInt = self.src[start..self.pos].parse().expect("digits");
                return Ok((Tok::Int(n), at));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                return Ok((Tok::Ident(self.src[start..self.pos].to_string()), at));
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap();
                return Err(ParseError::Syntax {
                    offset: at,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        self.pos += 1;
        Ok((tok, at))
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    ctx: Arc<VarContext>,
    trunc: u32,
    /// Cleared once a product had terms above the truncation.
    complete: bool,
}

impl Parser {
    fn product(&mut self, a: &TruncatedSeries, b: &TruncatedSeries) -> TruncatedSeries {
        if !a.is_zero() && !b.is_zero() && a.max_weight() + b.max_weight() > self.trunc {
            self.complete = false;
        }
        a.mul(b).expect("same context")
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn at(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.at(),
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<TruncatedSeries, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.add(&t).expect("same context");
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.sub(&t).expect("same context");
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<TruncatedSeries, ParseError> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::Star {
            self.bump();
            let f = self.unary()?;
            acc = self.product(&acc, &f);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<TruncatedSeries, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<TruncatedSeries, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.at();
        match self.bump() {
            Tok::Int(n) => {
                let e: u32 = n
                    .try_into()
                    .ok()
                    .filter(|&e| e <= MAX_EXPONENT)
                    .ok_or(ParseError::ExponentOverflow { offset: at })?;
                let mut acc = TruncatedSeries::one(&self.ctx, self.trunc);
                for _ in 0..e {
                    acc = self.product(&acc, &base);
                    if acc.is_zero() {
                        break;
                    }
                }
                Ok(acc)
            }
            _ => Err(ParseError::Syntax {
                offset: at,
                message: "expected a non-negative integer exponent".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<TruncatedSeries, ParseError> {
        let at = self.at();
        match self.bump() {
            Tok::Int(n) => {
                let value = if *self.peek() == Tok::Slash {
                    self.bump();
                    let dat = self.at();
                    match self.bump() {
                        Tok::Int(d) if !d.is_zero() => Rational::new(n, d),
                        Tok::Int(_) => {
                            return Err(ParseError::Syntax {
                                offset: dat,
                                message: "zero denominator".into(),
                            })
                        }
                        _ => {
                            return Err(ParseError::Syntax {
                                offset: dat,
                                message: "expected an integer denominator".into(),
                            })
                        }
                    }
                } else {
                    Rational::from_integer(n)
                };
                Ok(TruncatedSeries::constant(&self.ctx, value, self.trunc))
            }
            Tok::Ident(name) => match self.ctx.index_of(&name) {
                Ok(i) => {
                    if self.ctx.weight(i) > self.trunc {
                        self.complete = false;
                    }
                    Ok(TruncatedSeries::var_at(&self.ctx, i, self.trunc))
                }
                Err(_) => Err(ParseError::UnknownIdentifier { name, offset: at }),
            },
            Tok::LParen => {
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.syntax("expected `)`"));
                }
                self.bump();
                Ok(e)
            }
            Tok::End => Err(ParseError::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            t => Err(ParseError::Syntax {
                offset: at,
                message: format!("unexpected token {t:?}"),
            }),
        }
    }
}

/// Parses a polynomial in the variables of `ctx`, truncated at `trunc`.
/// `base` is added to reported byte offsets.
fn parse_in(
    text: &str,
    ctx: &Arc<VarContext>,
    trunc: u32,
    base: usize,
) -> Result<TruncatedSeries, ParseError> {
    Ok(parse_tracked(text, ctx, trunc, base)?.0)
}

fn parse_tracked(
    text: &str,
    ctx: &Arc<VarContext>,
    trunc: u32,
    base: usize,
) -> Result<(TruncatedSeries, bool), ParseError> {
    let toks = Lexer::tokens(text, base)?;
    let mut p = Parser {
        toks,
        i: 0,
        ctx: ctx.clone(),
        trunc,
        complete: true,
    };
    let s = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok((s, p.complete))
}

/// Parses a polynomial over an arbitrary context.
pub fn parse_polynomial(
    text: &str,
    ctx: &Arc<VarContext>,
    trunc: u32,
) -> Result<TruncatedSeries, ParseError> {
    parse_in(text, ctx, trunc, 0)
}

/// Right-hand side `F(x, y, u)` of `y'' = F`, with `u` standing for `y'`.
pub fn parse_ode(text: &str, trunc: u32) -> Result<TruncatedSeries, ParseError> {
    parse_in(text, &VarContext::xyu(), trunc, 0)
}

/// [`parse_ode`], also telling whether the result is the whole polynomial
/// (no product reached past `trunc`).
pub fn parse_ode_complete(text: &str, trunc: u32) -> Result<(TruncatedSeries, bool), ParseError> {
    parse_tracked(text, &VarContext::xyu(), trunc, 0)
}

/// A point map written `"f ; g"` in the variables `x, y`.
pub fn parse_map(text: &str, trunc: u32) -> Result<(TruncatedSeries, TruncatedSeries), ParseError> {
    let (f, g) = text.split_once(';').ok_or(ParseError::MissingSeparator)?;
    let ctx = VarContext::xy();
    let fs = parse_in(f, &ctx, trunc, 0)?;
    let gs = parse_in(g, &ctx, trunc, f.len() + 1)?;
    Ok((fs, gs))
}

/// Canonical text form: terms in canonical order, variables in context
/// order, `"0"` for the zero series.
pub fn format_series(s: &TruncatedSeries) -> String {
    let ctx = s.ctx();
    let mut out = String::new();
    for (k, (m, c)) in s.terms().enumerate() {
        let neg = c.is_negative();
        let abs = c.abs();
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let vars: Vec<String> = (0..ctx.len())
            .filter(|&i| m.exp(i) > 0)
            .map(|i| match m.exp(i) {
                1 => ctx.name(i).to_string(),
                e => format!("{}^{}", ctx.name(i), e),
            })
            .collect();
        let mono = vars.join("*");
        if mono.is_empty() {
            out.push_str(&format_rational(&abs));
        } else if abs.is_one() {
            out.push_str(&mono);
        } else if abs.is_integer() {
            out.push_str(&format!("{}*{}", abs.numer(), mono));
        } else {
            out.push_str(&format!("({})*{}", format_rational(&abs), mono));
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}
