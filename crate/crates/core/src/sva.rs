//! Assertion ingest: structural syntax check and referenced-signal
//! extraction for SystemVerilog assertions.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::lexer::{tokenize, Token, TokenKind};

/// Entry of an `assertions/v1` file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAssertion {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assertion {
    pub id: String,
    pub text: String,
    /// Referenced signals, sorted and de-duplicated.
    pub signals: Vec<String>,
    pub origin_iteration: u32,
    pub syntax_ok: bool,
    /// Byte offset of a tokenizer failure, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tokenize_error: Option<usize>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SvaError {
    #[error("duplicate assertion id `{0}`")]
    DuplicateId(String),
    #[error("malformed assertions file: {0}")]
    Malformed(String),
}

/// Names dropped from every signal set in addition to keywords, system
/// functions and literals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalFilter {
    pub ubiquitous: BTreeSet<String>,
}

impl Default for SignalFilter {
    fn default() -> Self {
        let ubiquitous = ["clk", "clock", "rst", "rst_n", "reset"].iter().map(|s| s.to_string()).collect();
        SignalFilter { ubiquitous }
    }
}

impl SignalFilter {
    pub fn none() -> Self {
        SignalFilter { ubiquitous: BTreeSet::new() }
    }

    fn keeps(&self, t: &Token) -> bool {
        t.kind == TokenKind::Ident && !self.ubiquitous.contains(&t.text)
    }
}

/// Parses an `assertions/v1` document (a JSON array of `{id, text, iteration?}`).
pub fn parse_assertions_json(text: &str) -> Result<Vec<RawAssertion>, SvaError> {
    serde_json::from_str(text).map_err(|e| SvaError::Malformed(e.to_string()))
}

pub fn ingest_assertions(raw: &[RawAssertion], filter: &SignalFilter) -> Result<Vec<Assertion>, SvaError> {
    let mut seen = HashSet::new();
    for r in raw {
        if !seen.insert(r.id.as_str()) {
            return Err(SvaError::DuplicateId(r.id.clone()));
        }
    }
    Ok(raw.iter().map(|r| ingest_one(r, filter)).collect())
}

pub fn ingest_one(raw: &RawAssertion, filter: &SignalFilter) -> Assertion {
    let origin_iteration = raw.iteration.unwrap_or(0);
    match tokenize(&raw.text) {
        Ok(tokens) => {
            Assertion {
                id: raw.id.clone(),
                text: raw.text.clone(),
                signals: extract_signals(&tokens, filter),
                origin_iteration,
                syntax_ok: structurally_valid(&tokens),
                tokenize_error: None,
            }
        }
        Err(e) => Assertion {
            id: raw.id.clone(),
            text: raw.text.clone(),
            signals: Vec::new(),
            origin_iteration,
            syntax_ok: false,
            tokenize_error: Some(e.offset),
        },
    }
}

pub fn count_syntax_correct(assertions: &[Assertion]) -> usize {
    assertions.iter().filter(|a| a.syntax_ok).count()
}

/// Leading `label :` before the assertion keyword.
fn label_len(t: &[Token]) -> usize {
    if t.len() >= 2 && t[0].kind == TokenKind::Ident && t[1].is_punct(":") {
        2
    } else {
        0
    }
}

fn extract_signals(tokens: &[Token], filter: &SignalFilter) -> Vec<String> {
    let body = &tokens[label_len(tokens)..];
    let set: BTreeSet<&str> = body.iter().filter(|t| filter.keeps(t)).map(|t| t.text.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

const ASSERTION_KEYWORDS: &[&str] = &["assert", "assume", "cover", "restrict"];

const BINARY_OPS: &[&str] = &[
    "|->", "|=>", "&&", "||", "##", "&", "|", "^", "==", "!=", "===", "!==", "<", ">", "<=", ">=",
    "+", "-", "*", "/", "%", "=", "?", ":", "->", "<->", "<<", ">>", ",",
];

const LEADING_BAD: &[&str] =
    &["|->", "|=>", "&&", "||", "==", "!=", "<=", ">=", "=", "?", ":", "*", "/", "%", ",", ")", "]", "}"];

const BINARY_KEYWORDS: &[&str] =
    &["and", "or", "throughout", "within", "intersect", "until", "until_with", "implies", "iff"];

fn ends_dangling(body: &[Token]) -> bool {
    match body.last() {
        None => true,
        Some(t) => {
            (t.kind == TokenKind::Punct && BINARY_OPS.contains(&t.text.as_str()))
                || (t.kind == TokenKind::Keyword && BINARY_KEYWORDS.contains(&t.text.as_str()))
        }
    }
}

fn starts_dangling(body: &[Token]) -> bool {
    body.first().is_some_and(|t| {
        (t.kind == TokenKind::Punct && LEADING_BAD.contains(&t.text.as_str()))
            || (t.kind == TokenKind::Keyword && BINARY_KEYWORDS.contains(&t.text.as_str()))
    })
}

/// Index of the token closing the group opened at `open`, if balanced.
fn matching_close(tokens: &[Token], open: usize) -> Option<usize> {
    let mut stack = Vec::new();
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "(" => stack.push(")"),
            "[" | "[*" | "[=" | "[->" => stack.push("]"),
            "{" | "'{" => stack.push("}"),
            c @ (")" | "]" | "}") => {
                if stack.pop() != Some(c) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn balanced(tokens: &[Token]) -> bool {
    let mut stack = Vec::new();
    for t in tokens.iter().filter(|t| t.kind == TokenKind::Punct) {
        match t.text.as_str() {
            "(" => stack.push(")"),
            "[" | "[*" | "[=" | "[->" => stack.push("]"),
            "{" | "'{" => stack.push("}"),
            c @ (")" | "]" | "}") if stack.pop() != Some(c) => return false,
            _ => {}
        }
    }
    stack.is_empty()
}

/// Where the property expression lives within the token stream.
enum Skeleton {
    /// `assert property ( body ) [action] [;]`: body token range.
    Directive(std::ops::Range<usize>),
    /// Bare property or sequence expression.
    Bare(std::ops::Range<usize>),
}

fn skeleton(tokens: &[Token]) -> Option<Skeleton> {
    let start = label_len(tokens);
    let first = tokens.get(start)?;
    if first.kind == TokenKind::Keyword && ASSERTION_KEYWORDS.contains(&first.text.as_str()) {
        let mut i = start + 1;
        if tokens.get(i).is_some_and(|t| t.is_keyword("property") || t.is_keyword("sequence") || t.is_keyword("final")) {
            i += 1;
        }
        if !tokens.get(i)?.is_punct("(") {
            return None;
        }
        let close = matching_close(tokens, i)?;
        return Some(Skeleton::Directive(i + 1..close));
    }
    let mut end = tokens.len();
    if end > start && tokens[end - 1].is_punct(";") {
        end -= 1;
    }
    Some(Skeleton::Bare(start..end))
}

fn structurally_valid(tokens: &[Token]) -> bool {
    if !balanced(tokens) {
        return false;
    }
    let Some(sk) = skeleton(tokens) else { return false };
    let body = match &sk {
        Skeleton::Directive(r) | Skeleton::Bare(r) => &tokens[r.clone()],
    };
    let body = strip_clocking(body);
    if body.is_empty() || ends_dangling(body) || starts_dangling(body) {
        return false;
    }
    if body.iter().any(|t| {
        t.is_punct(";") || (t.kind == TokenKind::Keyword && ASSERTION_KEYWORDS.contains(&t.text.as_str()))
    }) {
        return false;
    }
    match sk {
        Skeleton::Bare(_) => true,
        Skeleton::Directive(r) => {
            // optional action block, then an optional single trailing `;`
            let tail = &tokens[r.end + 1..];
            match tail.iter().position(|t| t.is_punct(";")) {
                None => tail.is_empty(),
                Some(p) => p + 1 == tail.len(),
            }
        }
    }
}

/// Skips a leading `@(...)` clocking event and `disable iff (...)`.
fn strip_clocking(mut body: &[Token]) -> &[Token] {
    loop {
        if body.first().is_some_and(|t| t.is_punct("@")) && body.get(1).is_some_and(|t| t.is_punct("(")) {
            match matching_close(body, 1) {
                Some(c) => body = &body[c + 1..],
                None => return body,
            }
        } else if body.first().is_some_and(|t| t.is_keyword("disable"))
            && body.get(1).is_some_and(|t| t.is_keyword("iff"))
            && body.get(2).is_some_and(|t| t.is_punct("("))
        {
            match matching_close(body, 2) {
                Some(c) => body = &body[c + 1..],
                None => return body,
            }
        } else {
            return body;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Implication {
    /// `|->`
    Overlapped,
    /// `|=>`
    NextCycle,
}

/// Coarse shape of a property used for deterministic intent text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySketch {
    pub implication: Option<Implication>,
    /// Signals of the antecedent, or of the whole property without implication.
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    /// System functions, cycle delays and repetitions in order of appearance.
    pub temporal: Vec<String>,
}

pub fn property_sketch(text: &str, filter: &SignalFilter) -> PropertySketch {
    let empty = PropertySketch { implication: None, antecedent: Vec::new(), consequent: Vec::new(), temporal: Vec::new() };
    let Ok(tokens) = tokenize(text) else { return empty };
    let body = match skeleton(&tokens) {
        Some(Skeleton::Directive(r)) | Some(Skeleton::Bare(r)) => &tokens[r],
        None => &tokens[label_len(&tokens)..],
    };
    let body = strip_clocking(body);

    let mut depth = 0usize;
    let mut split = None;
    for (i, t) in body.iter().enumerate() {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" | "'{" | "[*" | "[=" | "[->" => depth += 1,
            ")" | "]" | "}" => depth = depth.saturating_sub(1),
            "|->" if depth == 0 => {
                split = Some((i, Implication::Overlapped));
                break;
            }
            "|=>" if depth == 0 => {
                split = Some((i, Implication::NextCycle));
                break;
            }
            _ => {}
        }
    }
    let (lhs, rhs, implication) = match split {
        Some((i, kind)) => (&body[..i], &body[i + 1..], Some(kind)),
        None => (body, &body[body.len()..], None),
    };
    let sigs = |ts: &[Token]| extract_signals_plain(ts, filter);

    let mut temporal: Vec<String> = Vec::new();
    let mut push = |s: String| {
        if !temporal.contains(&s) {
            temporal.push(s);
        }
    };
    for (i, t) in body.iter().enumerate() {
        match t.kind {
            TokenKind::SystemName => push(t.text.clone()),
            TokenKind::Punct if t.text == "##" => {
                let next = body.get(i + 1);
                match next {
                    Some(n) if n.kind == TokenKind::Number => push(format!("##{}", n.text)),
                    Some(n) if n.is_punct("[") => push("##[..]".to_string()),
                    _ => push("##".to_string()),
                }
            }
            TokenKind::Punct if matches!(t.text.as_str(), "[*" | "[*]" | "[+]" | "[=" | "[->") => {
                push(format!("{}..]", t.text.trim_end_matches(']')))
            }
            _ => {}
        }
    }
    PropertySketch { implication, antecedent: sigs(lhs), consequent: sigs(rhs), temporal }
}

fn extract_signals_plain(tokens: &[Token], filter: &SignalFilter) -> Vec<String> {
    let set: BTreeSet<&str> = tokens.iter().filter(|t| filter.keeps(t)).map(|t| t.text.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}
