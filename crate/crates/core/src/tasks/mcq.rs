use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{SchemaError, VerificationError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
    D,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::A, Label::B, Label::C, Label::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self as u8) as char
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Label {
    type Err = VerificationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Label::A),
            "B" => Ok(Label::B),
            "C" => Ok(Label::C),
            "D" => Ok(Label::D),
            _ => Err(VerificationError::Unparseable(s.to_string())),
        }
    }
}

/// A four-way multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McqInstance {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: Label,
}

impl McqInstance {
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.choices.len() != 4 {
            return Err(SchemaError::new(format!(
                "expected 4 choices, got {}",
                self.choices.len()
            )));
        }
        Ok(())
    }

    /// Apply a permutation to the choices; `perm[k]` is the old index of the
    /// new choice `k`. The gold label moves with its text.
    pub fn permuted(&self, perm: [usize; 4]) -> Self {
        let choices = perm.iter().map(|&k| self.choices[k].clone()).collect();
        let new_gold = perm.iter().position(|&k| k == self.answer.index()).expect("perm");
        Self {
            id: self.id.clone(),
            question: self.question.clone(),
            choices,
            answer: Label::from_index(new_gold).expect("index < 4"),
        }
    }
}

fn paren_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*([A-Da-d])\s*\)").expect("regex"))
}

fn answer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\banswer\b\s*(?:is|:)?\s*[:\-]?\s*\(?\s*([A-D])\b").expect("regex")
    })
}

/// Pull a label out of free text.
///
/// Strict mode accepts only a bare letter. Tolerant mode takes whichever of
/// `(X)` or `answer ... X` appears last.
pub fn extract_label(text: &str, strict: bool) -> Result<Label, VerificationError> {
    if let Ok(l) = text.parse::<Label>() {
        return Ok(l);
    }
    if strict {
        return Err(VerificationError::Unparseable(text.to_string()));
    }
    let last = |re: &Regex| {
        re.captures_iter(text)
            .last()
            .map(|c| (c.get(0).expect("match").start(), c[1].to_string()))
    };
    let hit = match (last(paren_re()), last(answer_re())) {
        (Some(a), Some(b)) => Some(if a.0 >= b.0 { a } else { b }),
        (a, b) => a.or(b),
    };
    hit.map(|(_, l)| l.parse().expect("regex yields A-D"))
        .ok_or_else(|| VerificationError::Unparseable(text.to_string()))
}

pub fn mcq_verify(instance: &McqInstance, answer: &str) -> Result<bool, VerificationError> {
    Ok(extract_label(answer, false)? == instance.answer)
}

pub fn mcq_verify_strict(
    instance: &McqInstance,
    answer: &str,
    strict: bool,
) -> Result<bool, VerificationError> {
    Ok(extract_label(answer, strict)? == instance.answer)
}
