//! Text grammar for formulas.
//!
//! ```text
//! formula := or
//! or      := and ('|' and)*
//! and     := since ('&' since)*
//! since   := unary ('S' mask? unary)*
//! unary   := '!' unary | 'F' mask? unary | 'G' mask? unary | '(' formula ')' | atom
//! atom    := lhs ('>=' | '<=' | '>' | '<') number
//! lhs     := feature | term ('+' term)*        term := number '*' feature
//! mask    := '[' int ',' int ']' | '[' '{' int (',' int)* '}' ']'
//! ```
//!
//! `>` and `<` are accepted and read as `>=` / `<=`. Features are `x<k>`
//! (zero-based) or, when a name list is supplied, a column name.

use super::formula::{Atom, Formula, IntervalMask};
use super::StlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Bang,
    Amp,
    Pipe,
    Star,
    Plus,
    Ge,
    Le,
    Num(f64),
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, StlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            '!' => Some(Tok::Bang),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '*' => Some(Tok::Star),
            '+' => Some(Tok::Plus),
            _ => None,
        };
        if let Some(t) = single {
            out.push((start, t));
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '>' || c == '<' {
            i += 1;
            if i < bytes.len() && bytes[i] == b'=' {
                i += 1;
            }
            out.push((start, if c == '>' { Tok::Ge } else { Tok::Le }));
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || c == '.'
            || (c == '-'
                && bytes
                    .get(i + 1)
                    .is_some_and(|b| b.is_ascii_digit() || *b == b'.'));
        if starts_number {
            i += 1;
            while i < bytes.len() {
                let b = bytes[i];
                let exp_sign = (b == b'-' || b == b'+') && matches!(bytes[i - 1], b'e' | b'E');
                if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| StlError::Syntax {
                pos: start,
                msg: format!("bad number '{s}'"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
            continue;
        }
        return Err(StlError::Syntax {
            pos: start,
            msg: format!("unexpected character '{c}'"),
        });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    names: Option<&'a [String]>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|(_, t)| t.clone());
        self.at += 1;
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, StlError> {
        Err(StlError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), StlError> {
        if self.peek() == Some(&want) {
            self.at += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.at += 1;
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.since()?;
        while self.peek() == Some(&Tok::Amp) {
            self.at += 1;
            lhs = Formula::and(lhs, self.since()?);
        }
        Ok(lhs)
    }

    fn since(&mut self) -> Result<Formula, StlError> {
        let mut lhs = self.unary()?;
        while self.is_keyword("S") {
            self.at += 1;
            let mask = self.mask()?;
            lhs = Formula::since(mask, lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.at += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(f)
            }
            Some(Tok::Ident(s)) if s == "F" || s == "G" => {
                let once = s == "F";
                self.at += 1;
                let mask = self.mask()?;
                let arg = self.unary()?;
                Ok(if once {
                    Formula::once(mask, arg)
                } else {
                    Formula::hist(mask, arg)
                })
            }
            Some(Tok::Ident(_)) | Some(Tok::Num(_)) => self.atom(),
            Some(_) => self.err("expected a formula"),
            None => self.err("unexpected end of input"),
        }
    }

    fn mask_int(&mut self) -> Result<usize, StlError> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            _ => Err(StlError::MalformedMask(format!(
                "expected a non-negative integer step at position {pos}"
            ))),
        }
    }

    fn mask(&mut self) -> Result<IntervalMask, StlError> {
        if self.peek() != Some(&Tok::LBracket) {
            return Ok(IntervalMask::Unbounded);
        }
        let pos = self.pos();
        self.at += 1;
        let mask = if self.peek() == Some(&Tok::LBrace) {
            self.at += 1;
            let mut steps = vec![self.mask_int()?];
            while self.peek() == Some(&Tok::Comma) {
                self.at += 1;
                steps.push(self.mask_int()?);
            }
            if self.bump() != Some(Tok::RBrace) {
                return Err(StlError::MalformedMask(format!("unclosed '{{' in mask at position {pos}")));
            }
            IntervalMask::steps(steps)
        } else {
            let lo = self.mask_int()?;
            if self.bump() != Some(Tok::Comma) {
                return Err(StlError::MalformedMask(format!("expected ',' in mask at position {pos}")));
            }
            let hi = self.mask_int()?;
            IntervalMask::range(lo, hi)
        };
        if self.bump() != Some(Tok::RBracket) {
            return Err(StlError::MalformedMask(format!("unclosed '[' in mask at position {pos}")));
        }
        mask.map_err(|e| match e {
            StlError::MalformedMask(m) => StlError::MalformedMask(format!("{m} at position {pos}")),
            other => other,
        })
    }

    fn feature(&mut self) -> Result<usize, StlError> {
        let pos = self.pos();
        let name = match self.bump() {
            Some(Tok::Ident(s)) => s,
            _ => return Err(StlError::Syntax { pos, msg: "expected a feature".into() }),
        };
        if let Some(names) = self.names {
            if let Some(i) = names.iter().position(|n| *n == name) {
                return Ok(i);
            }
        }
        let indexed = name
            .strip_prefix('x')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse::<usize>().ok());
        match (indexed, self.names) {
            (Some(k), Some(names)) if k < names.len() => Ok(k),
            (Some(k), None) => Ok(k),
            _ => Err(StlError::UnknownFeature { name, pos }),
        }
    }

    fn number(&mut self) -> Result<f64, StlError> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(v),
            _ => {
                self.at -= 1;
                self.err("expected a number")
            }
        }
    }

    fn atom(&mut self) -> Result<Formula, StlError> {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        loop {
            let coef = if matches!(self.peek(), Some(Tok::Num(_))) {
                let c = self.number()?;
                self.expect(Tok::Star, "'*'")?;
                c
            } else {
                1.0
            };
            terms.push((self.feature()?, coef));
            if self.peek() == Some(&Tok::Plus) {
                self.at += 1;
            } else {
                break;
            }
        }
        let sign = match self.bump() {
            Some(Tok::Ge) => 1.0,
            Some(Tok::Le) => -1.0,
            _ => {
                self.at -= 1;
                return self.err("expected '>=' or '<='");
            }
        };
        let threshold = self.number()?;
        let dim = terms.iter().map(|(k, _)| k + 1).max().unwrap_or(0);
        let mut weights = vec![0.0; dim];
        for (k, c) in terms {
            weights[k] += sign * c;
        }
        Ok(Formula::Atom(Atom::new(weights, -sign * threshold)))
    }
}

fn parse_inner(text: &str, names: Option<&[String]>) -> Result<Formula, StlError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        names,
    };
    let f = p.formula()?;
    if p.at < p.toks.len() {
        return p.err("trailing input");
    }
    Ok(f)
}

/// Parses a formula over features `x0, x1, ...`; atoms are padded to the
/// largest referenced index.
pub fn parse(text: &str) -> Result<Formula, StlError> {
    let f = parse_inner(text, None)?;
    let d = f.dim();
    Ok(f.padded(d))
}

/// Parses against named columns; `x<k>` stays valid for `k < names.len()`.
/// Atoms get exactly `names.len()` weights.
pub fn parse_with_features(text: &str, names: &[String]) -> Result<Formula, StlError> {
    Ok(parse_inner(text, Some(names))?.padded(names.len()))
}

fn fmt_num(v: f64) -> String {
    // `{:?}` is the shortest string that parses back to the same value
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:?}")
}

fn fmt_mask(m: &IntervalMask) -> String {
    match (m, m.as_contiguous()) {
        (IntervalMask::Unbounded, _) => String::new(),
        (_, Some((lo, hi))) => format!("[{lo},{hi}]"),
        (IntervalMask::Steps(v), None) => {
            let items: Vec<String> = v.iter().map(|k| k.to_string()).collect();
            format!("[{{{}}}]", items.join(","))
        }
    }
}

fn feature_name(k: usize, names: Option<&[String]>) -> String {
    names
        .and_then(|n| n.get(k).cloned())
        .unwrap_or_else(|| format!("x{k}"))
}

fn fmt_atom(a: &Atom, names: Option<&[String]>) -> String {
    if let Some((k, w)) = a.single_feature() {
        let thr = fmt_num(-a.bias / w);
        let op = if w > 0.0 { ">=" } else { "<=" };
        return format!("{} {op} {thr}", feature_name(k, names));
    }
    let terms: Vec<String> = a
        .weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, w)| format!("{}*{}", fmt_num(*w), feature_name(k, names)))
        .collect();
    let lhs = if terms.is_empty() {
        format!("0.0*{}", feature_name(0, names))
    } else {
        terms.join(" + ")
    };
    format!("{lhs} >= {}", fmt_num(-a.bias))
}

fn fmt_inner(f: &Formula, names: Option<&[String]>) -> String {
    match f {
        Formula::Atom(a) => fmt_atom(a, names),
        Formula::Not(g) => format!("!({})", fmt_inner(g, names)),
        Formula::And(l, r) => format!("({}) & ({})", fmt_inner(l, names), fmt_inner(r, names)),
        Formula::Or(l, r) => format!("({}) | ({})", fmt_inner(l, names), fmt_inner(r, names)),
        Formula::Once(m, g) => format!("F{} ({})", fmt_mask(m), fmt_inner(g, names)),
        Formula::Hist(m, g) => format!("G{} ({})", fmt_mask(m), fmt_inner(g, names)),
        Formula::Since(m, l, r) => format!(
            "({}) S{} ({})",
            fmt_inner(l, names),
            fmt_mask(m),
            fmt_inner(r, names)
        ),
    }
}

/// Canonical, fully parenthesized text.
///
/// Single-feature atoms print as thresholds (`x0 <= 0.5`), which drops the
/// weight magnitude; other atoms print as linear combinations.
pub fn format(f: &Formula) -> String {
    fmt_inner(f, None)
}

pub fn format_with_features(f: &Formula, names: &[String]) -> String {
    fmt_inner(f, Some(names))
}

impl std::fmt::Display for Formula {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        out.write_str(&format(self))
    }
}

impl std::str::FromStr for Formula {
    type Err = StlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
