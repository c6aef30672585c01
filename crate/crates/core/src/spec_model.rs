//! Specification model: sub-specifications and their functional points.
//!
//! The structured `spec/v1` file is the normal input. A live provider can
//! also split free text into sub-specifications and points.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::semantic::{prompts, ProviderError, SemanticError, Semantics};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalPoint {
    pub id: String,
    pub text: String,
    pub signals: Vec<String>,
    #[serde(skip)]
    pub embedding: Vec<f64>,
    /// Assertion ids credited with covering this point.
    pub covered_by: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubSpec {
    pub id: String,
    pub title: String,
    pub signals: Vec<String>,
    pub description: String,
    pub points: Vec<FunctionalPoint>,
    #[serde(skip)]
    pub embedding: Vec<f64>,
}

impl SubSpec {
    /// Text embedded for sub-spec retrieval: title, description and the
    /// sorted signal list.
    pub fn embedding_text(&self) -> String {
        format!("{}\n{}\nsignals: {}", self.title, self.description, self.signals.join(" "))
    }

    pub fn point(&self, id: &str) -> Option<&FunctionalPoint> {
        self.points.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecSet {
    pub design: String,
    pub subspecs: Vec<SubSpec>,
}

impl SpecSet {
    pub fn subspec(&self, id: &str) -> Option<&SubSpec> {
        self.subspecs.iter().find(|s| s.id == id)
    }

    pub fn point_count(&self) -> usize {
        self.subspecs.iter().map(|s| s.points.len()).sum()
    }

    /// Sub-spec owning point `id`.
    pub fn owner_of(&self, point_id: &str) -> Option<&SubSpec> {
        self.subspecs.iter().find(|s| s.point(point_id).is_some())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("spec schema violation at `{pointer}`: {message}")]
    SchemaViolation { pointer: String, message: String },
    #[error("malformed provider reply: {0}")]
    MalformedProviderReply(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::SchemaViolation { pointer: pointer.into(), message: message.into() }
}

/// Identifier-like runs, case preserved.
pub fn name_tokens(text: &str) -> BTreeSet<&str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '$'))
        .filter(|t| !t.is_empty())
        .collect()
}

fn string_at<'a>(obj: &'a Value, key: &str, at: &str) -> Result<&'a str, SpecError> {
    obj.get(key).and_then(Value::as_str).ok_or_else(|| violation(format!("{at}/{key}"), "expected a string"))
}

fn nonempty_string_at<'a>(obj: &'a Value, key: &str, at: &str) -> Result<&'a str, SpecError> {
    let s = string_at(obj, key, at)?;
    if s.trim().is_empty() {
        return Err(violation(format!("{at}/{key}"), "must not be empty"));
    }
    Ok(s)
}

fn string_list(v: &Value, at: &str) -> Result<Vec<String>, SpecError> {
    let items = v.as_array().ok_or_else(|| violation(at, "expected an array of strings"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, s)| s.as_str().map(str::to_string).ok_or_else(|| violation(format!("{at}/{i}"), "expected a string")))
        .collect()
}

fn sorted_unique(v: Vec<String>) -> Vec<String> {
    v.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

/// Signals of a point: the sub-spec signals whose names appear in the
/// point text.
pub fn point_signals(text: &str, subspec_signals: &[String]) -> Vec<String> {
    let toks = name_tokens(text);
    subspec_signals.iter().filter(|s| toks.contains(s.as_str())).cloned().collect()
}

/// Parses and validates a `spec/v1` document. Embeddings are left empty.
pub fn parse_spec(text: &str) -> Result<SpecSet, SpecError> {
    let root: Value = serde_json::from_str(text).map_err(|e| violation("", format!("invalid JSON: {e}")))?;
    if !root.is_object() {
        return Err(violation("", "expected an object"));
    }
    if let Some(schema) = root.get("schema") {
        if schema.as_str() != Some("spec/v1") {
            return Err(violation("/schema", "expected \"spec/v1\""));
        }
    }
    let design = string_at(&root, "design", "")?.to_string();
    let subs = root.get("subspecs").and_then(Value::as_array).ok_or_else(|| violation("/subspecs", "expected an array"))?;
    if subs.is_empty() {
        return Err(violation("/subspecs", "at least one sub-spec is required"));
    }
    let mut sub_ids = HashSet::new();
    let mut point_ids = HashSet::new();
    let mut subspecs = Vec::with_capacity(subs.len());
    for (i, s) in subs.iter().enumerate() {
        let at = format!("/subspecs/{i}");
        if !s.is_object() {
            return Err(violation(at, "expected an object"));
        }
        let id = nonempty_string_at(s, "id", &at)?.to_string();
        if !sub_ids.insert(id.clone()) {
            return Err(violation(format!("{at}/id"), format!("duplicate sub-spec id `{id}`")));
        }
        let title = string_at(s, "title", &at)?.to_string();
        let signals = sorted_unique(string_list(s.get("signals").unwrap_or(&Value::Null), &format!("{at}/signals"))?);
        let description = nonempty_string_at(s, "description", &at)?.to_string();
        let pts = s
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| violation(format!("{at}/points"), "expected an array"))?;
        if pts.is_empty() {
            return Err(violation(format!("{at}/points"), "at least one point is required"));
        }
        let mut points = Vec::with_capacity(pts.len());
        for (j, p) in pts.iter().enumerate() {
            let pat = format!("{at}/points/{j}");
            if !p.is_object() {
                return Err(violation(pat, "expected an object"));
            }
            let pid = nonempty_string_at(p, "id", &pat)?.to_string();
            if !point_ids.insert(pid.clone()) {
                return Err(violation(format!("{pat}/id"), format!("duplicate point id `{pid}`")));
            }
            let ptext = nonempty_string_at(p, "text", &pat)?.to_string();
            if ptext.contains('\n') {
                return Err(violation(format!("{pat}/text"), "a point must be a single statement"));
            }
            let psignals = match p.get("signals") {
                None => point_signals(&ptext, &signals),
                Some(v) => {
                    let given = sorted_unique(string_list(v, &format!("{pat}/signals"))?);
                    let toks = name_tokens(&ptext);
                    if let Some(bad) = given.iter().find(|g| !toks.contains(g.as_str()) && !signals.contains(g)) {
                        return Err(violation(
                            format!("{pat}/signals"),
                            format!("`{bad}` is neither in the point text nor in the sub-spec signals"),
                        ));
                    }
                    given
                }
            };
            points.push(FunctionalPoint {
                id: pid,
                text: ptext,
                signals: psignals,
                embedding: Vec::new(),
                covered_by: BTreeSet::new(),
            });
        }
        subspecs.push(SubSpec { id, title, signals, description, points, embedding: Vec::new() });
    }
    Ok(SpecSet { design, subspecs })
}

/// Fills sub-spec and point embeddings.
pub fn embed_spec(spec: &mut SpecSet, sem: &Semantics) -> Result<(), SemanticError> {
    let texts: Vec<String> = spec.subspecs.iter().map(SubSpec::embedding_text).collect();
    let rows = sem.embed_batch(&texts)?;
    for (s, r) in spec.subspecs.iter_mut().zip(rows) {
        s.embedding = r;
    }
    let texts: Vec<String> = spec.subspecs.iter().flat_map(|s| s.points.iter().map(|p| p.text.clone())).collect();
    let mut rows = sem.embed_batch(&texts)?.into_iter();
    for p in spec.subspecs.iter_mut().flat_map(|s| s.points.iter_mut()) {
        p.embedding = rows.next().expect("one row per point");
    }
    Ok(())
}

/// Parses a `spec/v1` document and embeds it.
pub fn load_spec(text: &str, sem: &Semantics) -> Result<SpecSet, SpecError> {
    let mut spec = parse_spec(text)?;
    embed_spec(&mut spec, sem)?;
    Ok(spec)
}

#[derive(Debug, Deserialize)]
struct SplitReply {
    subspecs: Vec<SplitEntry>,
}

#[derive(Debug, Deserialize)]
struct SplitEntry {
    id: String,
    title: String,
    #[serde(default)]
    signals: Vec<String>,
    description: String,
}

/// Strips a surrounding markdown code fence, which chat models often add.
fn unfence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// Asks for `prompt`, parsing the reply as `T`; one repair round on a
/// parse failure.
fn ask_json<T: serde::de::DeserializeOwned>(sem: &Semantics, prompt: &str) -> Result<T, SpecError> {
    let reply = sem.complete(prompt)?;
    match serde_json::from_str(unfence(&reply)) {
        Ok(v) => Ok(v),
        Err(e) => {
            let repair = prompts::render(prompts::REPAIR, &[("error", &e.to_string()), ("reply", &reply)]);
            let second = sem.complete(&repair)?;
            serde_json::from_str(unfence(&second)).map_err(|e| SpecError::MalformedProviderReply(e.to_string()))
        }
    }
}

/// Splits free specification text with the live provider, then extracts
/// the points of each sub-spec. Point ids are numbered `q-1`, `q-2`, ...
/// across the whole document.
pub fn split_spec(spec_text: &str, design: &str, sem: &Semantics) -> Result<SpecSet, SpecError> {
    if spec_text.trim().is_empty() {
        return Err(violation("", "specification text is empty"));
    }
    let reply: SplitReply = ask_json(sem, &prompts::render(prompts::SPLIT, &[("spec", spec_text)]))?;
    if reply.subspecs.is_empty() {
        return Err(SpecError::MalformedProviderReply("no sub-specs returned".into()));
    }
    let mut subspecs = Vec::new();
    let mut seen = HashSet::new();
    let mut next_point = 1;
    for e in reply.subspecs {
        if !seen.insert(e.id.clone()) {
            return Err(SpecError::MalformedProviderReply(format!("duplicate sub-spec id `{}`", e.id)));
        }
        let signals = sorted_unique(e.signals);
        let mut sub = SubSpec { id: e.id, title: e.title, signals, description: e.description, points: Vec::new(), embedding: Vec::new() };
        for text in extract_points(&sub, sem)? {
            sub.points.push(FunctionalPoint {
                id: format!("q-{next_point}"),
                signals: point_signals(&text, &sub.signals),
                text,
                embedding: Vec::new(),
                covered_by: BTreeSet::new(),
            });
            next_point += 1;
        }
        subspecs.push(sub);
    }
    let mut spec = SpecSet { design: design.to_string(), subspecs };
    embed_spec(&mut spec, sem)?;
    Ok(spec)
}

/// Atomic statements for one sub-spec, verbatim from the provider.
pub fn extract_points(sub: &SubSpec, sem: &Semantics) -> Result<Vec<String>, SpecError> {
    if sub.description.trim().is_empty() {
        return Err(violation("", format!("sub-spec `{}` has no description", sub.id)));
    }
    let prompt = prompts::render(
        prompts::POINTS,
        &[("title", &sub.title), ("signals", &sub.signals.join(", ")), ("description", &sub.description)],
    );
    let points: Vec<String> = ask_json(sem, &prompt)?;
    // multi-line statements are split so each point stays atomic
    let points: Vec<String> =
        points.iter().flat_map(|p| p.lines()).map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect();
    if points.is_empty() {
        return Err(SpecError::MalformedProviderReply(format!("no points for sub-spec `{}`", sub.id)));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(points: Value) -> String {
        json!({
            "schema": "spec/v1",
            "design": "i2c",
            "subspecs": [{
                "id": "cmd",
                "title": "Command control",
                "signals": ["start", "stop", "read", "write", "go", "cmd_ack", "busy"],
                "description": "Command sequencing.",
                "points": points,
            }]
        })
        .to_string()
    }

    #[test]
    fn q1_signals_by_token_intersection() {
        let text = "go should be high when any of the commands (start, stop, read, write) is given and cmd_ack is low";
        let spec = parse_spec(&doc(json!([{ "id": "q-1", "text": text }]))).unwrap();
        let p = &spec.subspecs[0].points[0];
        assert_eq!(p.id, "q-1");
        assert_eq!(p.signals, vec!["cmd_ack", "go", "read", "start", "stop", "write"]);
    }

    #[test]
    fn empty_points_rejected_with_pointer() {
        match parse_spec(&doc(json!([]))) {
            Err(SpecError::SchemaViolation { pointer, .. }) => assert_eq!(pointer, "/subspecs/0/points"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn points_keep_file_order_and_reparse_is_stable() {
        let pts = json!([
            { "id": "p1", "text": "busy follows go" },
            { "id": "p2", "text": "cmd_ack clears go" },
            { "id": "p3", "text": "read and write are exclusive" },
            { "id": "p4", "text": "stop ends busy" },
        ]);
        let a = parse_spec(&doc(pts.clone())).unwrap();
        let ids: Vec<&str> = a.subspecs[0].points.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3", "p4"]);
        assert_eq!(a, parse_spec(&doc(pts)).unwrap());
    }

    #[test]
    fn foreign_point_signal_rejected() {
        let e = parse_spec(&doc(json!([{ "id": "p", "text": "go is high", "signals": ["go", "irq"] }]))).unwrap_err();
        assert!(matches!(e, SpecError::SchemaViolation { ref pointer, .. } if pointer == "/subspecs/0/points/0/signals"));
    }

    #[test]
    fn duplicate_and_multiline_rejected() {
        let dup = json!([{ "id": "p", "text": "go" }, { "id": "p", "text": "busy" }]);
        assert!(matches!(parse_spec(&doc(dup)), Err(SpecError::SchemaViolation { .. })));
        let multi = json!([{ "id": "p", "text": "go\nbusy" }]);
        assert!(matches!(parse_spec(&doc(multi)), Err(SpecError::SchemaViolation { .. })));
        assert!(matches!(parse_spec("[1]"), Err(SpecError::SchemaViolation { .. })));
    }

    #[test]
    fn unfence_strips_code_block() {
        assert_eq!(unfence("```json\n[\"a\"]\n```"), "[\"a\"]");
        assert_eq!(unfence(" [1] "), "[1]");
    }
}
