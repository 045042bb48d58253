use num_rational::Ratio;
use thiserror::Error;

use super::{Op, StepThought};
use crate::scalar::RatInt;

/// Malformed step text. `position` is a character offset into the input.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at {position}: {reason}")]
pub struct ParseError {
    pub position: usize,
    pub reason: String,
}

impl ParseError {
    fn new(position: usize, reason: impl Into<String>) -> Self {
        Self {
            position,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Op(Op),
    LParen,
    RParen,
    Comma,
    Eq,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((start, Tok::Num(chars[start..i].iter().collect())));
                continue;
            }
            '+' => Tok::Op(Op::Add),
            '-' | '−' | '–' => Tok::Op(Op::Sub),
            '*' | '×' | 'x' | 'X' | '·' => Tok::Op(Op::Mul),
            '/' | '÷' => Tok::Op(Op::Div),
            '(' | '（' => Tok::LParen,
            ')' | '）' => Tok::RParen,
            ',' | '，' => Tok::Comma,
            '=' => Tok::Eq,
            other => {
                return Err(ParseError::new(i, format!("unexpected character {other:?}")))
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

fn int<I: RatInt>(digits: &str, pos: usize) -> Result<I, ParseError> {
    digits
        .parse::<I>()
        .map_err(|_| ParseError::new(pos, format!("number {digits} out of range")))
}

/// `n`, `-n`, `p/q`, `-p/q`, optionally wrapped in one pair of parentheses.
fn rat_from<I: RatInt>(toks: &[(usize, Tok)], end: usize) -> Result<Ratio<I>, ParseError> {
    let pos = toks.first().map_or(end, |t| t.0);
    let inner = match toks {
        [(_, Tok::LParen), inner @ .., (_, Tok::RParen)] => inner,
        _ => toks,
    };
    let (neg, rest) = match inner {
        [(_, Tok::Op(Op::Sub)), rest @ ..] => (true, rest),
        _ => (false, inner),
    };
    let value = match rest {
        [(p, Tok::Num(n))] => Ratio::from_integer(int::<I>(n, *p)?),
        [(p, Tok::Num(n)), (_, Tok::Op(Op::Div)), (q, Tok::Num(d))] => {
            let den = int::<I>(d, *q)?;
            if den.is_zero() {
                return Err(ParseError::new(*q, "zero denominator"));
            }
            Ratio::new(int::<I>(n, *p)?, den)
        }
        _ => return Err(ParseError::new(pos, "expected a number")),
    };
    Ok(if neg { -value } else { value })
}

/// Parse one rational token such as `15`, `-2` or `8/3`.
pub fn parse_rat<I: RatInt>(text: &str) -> Result<Ratio<I>, ParseError> {
    let toks = tokenize(text)?;
    rat_from(&toks, text.chars().count())
}

/// Parse a comma-separated number list such as `1,14,16,25` (brackets and
/// parentheses around the whole list are ignored).
pub fn parse_numbers<I: RatInt>(text: &str) -> Result<Vec<Ratio<I>>, ParseError> {
    let trimmed = text
        .trim()
        .trim_start_matches(['[', '{', '<'])
        .trim_end_matches([']', '}', '>']);
    let toks = tokenize(trimmed)?;
    let toks: &[(usize, Tok)] = match toks.as_slice() {
        [(_, Tok::LParen), inner @ .., (_, Tok::RParen)]
            if !inner.iter().any(|t| matches!(t.1, Tok::LParen | Tok::RParen)) =>
        {
            inner
        }
        all => all,
    };
    if toks.is_empty() {
        return Err(ParseError::new(0, "empty number list"));
    }
    toks.split(|t| t.1 == Tok::Comma)
        .map(|part| rat_from(part, trimmed.chars().count()))
        .collect()
}

/// Split `lhs` into `a ∘ b`. Every top-level operator is tried as the split
/// point; exactly one split must yield two well-formed operands.
fn split_lhs<I: RatInt>(lhs: &[(usize, Tok)]) -> Result<(Ratio<I>, Op, Ratio<I>), ParseError> {
    let pos = lhs.first().map_or(0, |t| t.0);
    let mut depth = 0i32;
    let mut found = Vec::new();
    for (k, (_, tok)) in lhs.iter().enumerate() {
        match tok {
            Tok::LParen => depth += 1,
            Tok::RParen => depth -= 1,
            Tok::Op(op) if depth == 0 && k > 0 => {
                if let (Ok(a), Ok(b)) = (rat_from::<I>(&lhs[..k], pos), rat_from::<I>(&lhs[k + 1..], pos))
                {
                    found.push((a, *op, b));
                }
            }
            _ => {}
        }
    }
    match found.len() {
        1 => Ok(found.pop().unwrap()),
        0 => Err(ParseError::new(pos, "left side is not `a op b`")),
        _ => Err(ParseError::new(
            pos,
            "ambiguous left side; parenthesize fractional operands",
        )),
    }
}

/// Tolerant parse of `a∘b=c (r1,r2,...)`.
///
/// Accepts optional whitespace, surrounding quotes, unicode operator glyphs
/// (`×`, `÷`, `−`), and integer or `p/q` tokens. `raw_text` keeps the input.
pub fn parse_step<I: RatInt>(text: &str) -> Result<StepThought<I>, ParseError> {
    let body = text
        .trim()
        .trim_matches(|c| matches!(c, '\'' | '"' | '`'))
        .trim_end_matches('.');
    let offset = body.as_ptr() as usize - text.as_ptr() as usize;
    let shift = text[..offset].chars().count();
    let toks: Vec<(usize, Tok)> = tokenize(body)
        .map_err(|e| ParseError::new(e.position + shift, e.reason))?
        .into_iter()
        .map(|(p, t)| (p + shift, t))
        .collect();

    let eq = toks
        .iter()
        .position(|t| t.1 == Tok::Eq)
        .ok_or_else(|| ParseError::new(shift, "no `=` in step"))?;
    let (lhs, rhs) = (&toks[..eq], &toks[eq + 1..]);
    if lhs.is_empty() {
        return Err(ParseError::new(toks[eq].0, "missing left side"));
    }
    let (lhs_a, op, lhs_b) = split_lhs::<I>(lhs)?;

    // The remaining list is the last top-level parenthesized group.
    let eq_pos = toks[eq].0;
    let open = rhs
        .iter()
        .rposition(|t| t.1 == Tok::LParen)
        .ok_or_else(|| ParseError::new(eq_pos, "missing `(remaining numbers)`"))?;
    let close = rhs.len() - 1;
    if rhs[close].1 != Tok::RParen || open == 0 {
        let at = rhs.last().map_or(eq_pos, |t| t.0);
        return Err(ParseError::new(at, "missing `(remaining numbers)`"));
    }
    let claimed_result = rat_from::<I>(&rhs[..open], eq_pos + 1)?;
    let list = &rhs[open + 1..close];
    if list.is_empty() {
        return Err(ParseError::new(rhs[open].0, "empty remaining list"));
    }
    let claimed_remaining = list
        .split(|t| t.1 == Tok::Comma)
        .map(|part| rat_from::<I>(part, rhs[close].0))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(StepThought {
        lhs_a,
        op,
        lhs_b,
        claimed_result,
        claimed_remaining,
        raw_text: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = Ratio<i64>;

    fn ints(v: &[i64]) -> Vec<R> {
        v.iter().map(|&x| R::from(x)).collect()
    }

    #[test]
    fn case_study_lines() {
        let s = parse_step::<i64>("14+1=15 (16,25,15)").unwrap();
        assert_eq!(s.lhs_a, R::from(14));
        assert_eq!(s.op, Op::Add);
        assert_eq!(s.lhs_b, R::from(1));
        assert_eq!(s.claimed_result, R::from(15));
        assert_eq!(s.claimed_remaining, ints(&[16, 25, 15]));
        assert_eq!(s.raw_text, "14+1=15 (16,25,15)");

        let s = parse_step::<i64>("'16-1=15 (14,25,15)'").unwrap();
        assert_eq!(s.op, Op::Sub);
        assert_eq!(s.claimed_remaining, ints(&[14, 25, 15]));
    }

    #[test]
    fn tolerant_forms() {
        let s = parse_step::<i64>("  14 × 1 = 14 ( 16 , 25 , 14 ) ").unwrap();
        assert_eq!(s.op, Op::Mul);
        let s = parse_step::<i64>("8÷3=8/3 (3,8,8/3)").unwrap();
        assert_eq!(s.claimed_result, R::new(8, 3));
        let s = parse_step::<i64>("3-(8/3)=1/3 (8,1/3)").unwrap();
        assert_eq!(s.lhs_b, R::new(8, 3));
        let s = parse_step::<i64>("8/3-1=5/3 (5/3)").unwrap();
        assert_eq!((s.lhs_a, s.op), (R::new(8, 3), Op::Sub));
        let s = parse_step::<i64>("3--2=5 (5)").unwrap();
        assert_eq!(s.lhs_b, R::from(-2));
        let s = parse_step::<i64>("(-2)*3=-6 (-6,1)").unwrap();
        assert_eq!(s.claimed_remaining, ints(&[-6, 1]));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_step::<i64>("hello").is_err());
        assert!(parse_step::<i64>("").is_err());
        assert!(parse_step::<i64>("14+1=15").is_err());
        assert!(parse_step::<i64>("14+1=15 ()").is_err());
        assert!(parse_step::<i64>("14=15 (15)").is_err());
        assert!(parse_step::<i64>("8/3/2=4/3 (4/3)").is_err());
        assert!(parse_step::<i64>("1/0+1=1 (1)").is_err());
        let e = parse_step::<i64>("14+1=15 (16;25)").unwrap_err();
        assert_eq!(e.position, 11);
    }

    #[test]
    fn number_lists() {
        assert_eq!(parse_numbers::<i64>("1,14,16,25").unwrap(), ints(&[1, 14, 16, 25]));
        assert_eq!(parse_numbers::<i64>("(16, 25, 15)").unwrap(), ints(&[16, 25, 15]));
        assert_eq!(parse_numbers::<i64>("[8/3, 3]").unwrap(), vec![R::new(8, 3), R::from(3)]);
        assert!(parse_numbers::<i64>("").is_err());
    }
}
