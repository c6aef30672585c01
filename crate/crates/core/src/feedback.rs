//! Coverage-driven iteration: report uncovered points to a generator,
//! merge what it returns, and re-analyse until every sub-spec is covered
//! well enough.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::mapping::MappingResult;
use crate::pipeline::{run_pass, PassOutput, PipelineError};
use crate::rtl_ast::AstIndex;
use crate::semantic::{prompts, Semantics};
use crate::spec_model::SpecSet;
use crate::sva::{ingest_one, RawAssertion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadPoint {
    pub point_id: String,
    pub text: String,
    pub signals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadItem {
    pub subspec_id: String,
    pub subspec_description: String,
    pub match_degree: f64,
    pub uncovered_points: Vec<PayloadPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPayload {
    pub schema: String,
    pub iteration: u32,
    pub items: Vec<PayloadItem>,
}

impl FeedbackPayload {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_canonical_json(&self) -> String {
        crate::canonical::to_string(self)
    }
}

/// Sub-specs whose degree does not exceed `theta`, with their uncovered
/// points, worst first (ties by id).
pub fn build_payload(mapping: &MappingResult, spec: &SpecSet, theta: f64, iteration: u32) -> FeedbackPayload {
    let mut items: Vec<PayloadItem> = spec
        .subspecs
        .iter()
        .filter_map(|s| {
            let degree = mapping.match_degree.get(&s.id).copied().unwrap_or(0.0);
            if degree > theta {
                return None;
            }
            let uncovered_points = s
                .points
                .iter()
                .filter(|p| p.covered_by.is_empty())
                .map(|p| PayloadPoint { point_id: p.id.clone(), text: p.text.clone(), signals: p.signals.clone() })
                .collect();
            Some(PayloadItem {
                subspec_id: s.id.clone(),
                subspec_description: s.description.clone(),
                match_degree: degree,
                uncovered_points,
            })
        })
        .collect();
    items.sort_by(|a, b| a.match_degree.total_cmp(&b.match_degree).then_with(|| a.subspec_id.cmp(&b.subspec_id)));
    FeedbackPayload { schema: "payload/v1".into(), iteration, items }
}

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("generator not found: {}", .0.display())]
    AdapterNotFound(PathBuf),
    #[error("generator failed: {0}")]
    Failure(String),
}

/// Source of new assertions for uncovered points. Returned ids only need
/// to be unique within one call; the loop namespaces them.
pub trait GeneratorAdapter {
    fn generate(&mut self, payload: &FeedbackPayload) -> Result<Vec<RawAssertion>, GeneratorError>;
}

/// Replays a fixture: a JSON object mapping point ids to one assertion
/// text (or a list of texts). Every uncovered point with an entry gets its
/// texts, ids taken from the point id.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    script: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl ScriptedGenerator {
    pub fn from_json(text: &str) -> Result<Self, GeneratorError> {
        let raw: BTreeMap<String, OneOrMany> =
            serde_json::from_str(text).map_err(|e| GeneratorError::Failure(format!("bad stub fixture: {e}")))?;
        let script = raw
            .into_iter()
            .map(|(k, v)| {
                let texts = match v {
                    OneOrMany::One(t) => vec![t],
                    OneOrMany::Many(ts) => ts,
                };
                (k, texts)
            })
            .collect();
        Ok(ScriptedGenerator { script })
    }

    pub fn from_path(path: &Path) -> Result<Self, GeneratorError> {
        let text = std::fs::read_to_string(path).map_err(|_| GeneratorError::AdapterNotFound(path.into()))?;
        Self::from_json(&text)
    }
}

impl GeneratorAdapter for ScriptedGenerator {
    fn generate(&mut self, payload: &FeedbackPayload) -> Result<Vec<RawAssertion>, GeneratorError> {
        let mut out = Vec::new();
        for p in payload.items.iter().flat_map(|i| &i.uncovered_points) {
            for (k, text) in self.script.get(&p.point_id).into_iter().flatten().enumerate() {
                let id = if k == 0 { p.point_id.clone() } else { format!("{}-{k}", p.point_id) };
                out.push(RawAssertion { id, text: text.clone(), iteration: None });
            }
        }
        Ok(out)
    }
}

/// Runs an external program with the payload on stdin and reads an
/// `assertions/v1` array from its stdout.
#[derive(Debug, Clone)]
pub struct CommandGenerator {
    program: PathBuf,
}

impl CommandGenerator {
    pub fn new(program: impl Into<PathBuf>) -> Result<Self, GeneratorError> {
        let program = program.into();
        if !program.is_file() {
            return Err(GeneratorError::AdapterNotFound(program));
        }
        Ok(CommandGenerator { program })
    }
}

impl GeneratorAdapter for CommandGenerator {
    fn generate(&mut self, payload: &FeedbackPayload) -> Result<Vec<RawAssertion>, GeneratorError> {
        let mut child = Command::new(&self.program)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| GeneratorError::Failure(format!("{}: {e}", self.program.display())))?;
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(payload.to_canonical_json().as_bytes())
            .map_err(|e| GeneratorError::Failure(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| GeneratorError::Failure(e.to_string()))?;
        if !out.status.success() {
            return Err(GeneratorError::Failure(format!("{} exited with {}", self.program.display(), out.status)));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| GeneratorError::Failure(format!("bad generator output: {e}")))
    }
}

/// Asks the live chat model for one assertion per uncovered point.
pub struct LlmGenerator<'a> {
    sem: &'a Semantics,
}

impl<'a> LlmGenerator<'a> {
    pub fn new(sem: &'a Semantics) -> Self {
        LlmGenerator { sem }
    }
}

#[derive(Deserialize)]
struct Generated {
    point_id: String,
    text: String,
}

impl GeneratorAdapter for LlmGenerator<'_> {
    fn generate(&mut self, payload: &FeedbackPayload) -> Result<Vec<RawAssertion>, GeneratorError> {
        let prompt = prompts::render(prompts::GENERATE, &[("payload", &payload.to_canonical_json())]);
        let reply = self.sem.complete(&prompt).map_err(|e| GeneratorError::Failure(e.to_string()))?;
        let body = reply.trim().trim_start_matches("```json").trim_start_matches("```").trim_end_matches("```");
        let items: Vec<Generated> =
            serde_json::from_str(body.trim()).map_err(|e| GeneratorError::Failure(format!("bad model reply: {e}")))?;
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        Ok(items
            .into_iter()
            .map(|g| {
                let n = seen.entry(g.point_id.clone()).or_default();
                let id = if *n == 0 { g.point_id.clone() } else { format!("{}-{n}", g.point_id) };
                *n += 1;
                RawAssertion { id, text: g.text, iteration: None }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    ThresholdMet,
    MaxIterations,
    GeneratorExhausted,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::ThresholdMet => "threshold_met",
            TerminationReason::MaxIterations => "max_iterations",
            TerminationReason::GeneratorExhausted => "generator_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub added_count: usize,
    /// Cumulative totals after this iteration.
    pub total_count: usize,
    pub syntax_correct_count: usize,
    pub match_degrees: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub schema: String,
    pub iteration: u32,
    pub assertions: Vec<RawAssertion>,
    pub history: Vec<IterationRecord>,
    pub terminated_reason: TerminationReason,
}

/// One executed pass and the payload that led to it (none for iteration 0).
#[derive(Debug, Clone)]
pub struct IterationOutput {
    pub iteration: u32,
    pub payload: Option<FeedbackPayload>,
    pub pass: PassOutput,
}

#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub state: LoopState,
    pub iterations: Vec<IterationOutput>,
    /// Coverage ledger after the last pass.
    pub spec: SpecSet,
    /// Gaps left after the last pass.
    pub final_payload: FeedbackPayload,
}

impl LoopOutcome {
    pub fn last(&self) -> &PassOutput {
        &self.iterations.last().expect("iteration 0 always runs").pass
    }
}

/// True when every sub-spec degree strictly exceeds `theta`.
pub fn threshold_met(mapping: &MappingResult, theta: f64) -> bool {
    mapping.match_degree.values().all(|&d| d > theta)
}

fn ingest_all(raw: &[RawAssertion], cfg: &RunConfig) -> Vec<crate::sva::Assertion> {
    let filter = cfg.signal_filter();
    raw.iter().map(|r| ingest_one(r, &filter)).collect()
}

/// Iteration 0 analyses the seeds; each later iteration sends the gaps to
/// `generator`, adds the new assertions (ids prefixed `it<k>-`, exact
/// duplicate texts dropped) and re-analyses from scratch.
pub fn run_loop(
    cfg: &RunConfig,
    mut spec: SpecSet,
    index: &AstIndex,
    seeds: Vec<RawAssertion>,
    generator: &mut dyn GeneratorAdapter,
    sem: &Semantics,
) -> Result<LoopOutcome, PipelineError> {
    let theta = cfg.loop_.theta;
    let mut raw: Vec<RawAssertion> = seeds.into_iter().map(|r| RawAssertion { iteration: Some(0), ..r }).collect();
    let first = run_pass(ingest_all(&raw, cfg), index, &mut spec, sem, cfg)
        .map_err(|e| PipelineError::Iteration { iteration: 0, source: Box::new(e) })?;
    let mut history = vec![IterationRecord {
        iteration: 0,
        added_count: raw.len(),
        total_count: first.n(),
        syntax_correct_count: first.s(),
        match_degrees: first.mapping.match_degree.clone(),
        generator_error: None,
    }];
    let mut iterations = vec![IterationOutput { iteration: 0, payload: None, pass: first }];
    let mut iteration = 0;
    let reason = loop {
        let current = &iterations.last().expect("non-empty").pass;
        if threshold_met(&current.mapping, theta) {
            break TerminationReason::ThresholdMet;
        }
        if iteration >= cfg.loop_.max_iterations {
            break TerminationReason::MaxIterations;
        }
        let k = iteration + 1;
        let payload = build_payload(&current.mapping, &spec, theta, k);
        let no_progress = |error: Option<String>| IterationRecord {
            iteration: k,
            added_count: 0,
            total_count: current.n(),
            syntax_correct_count: current.s(),
            match_degrees: current.mapping.match_degree.clone(),
            generator_error: error,
        };
        let generated = match generator.generate(&payload) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("iteration {k}: {e}");
                history.push(no_progress(Some(e.to_string())));
                iteration = k;
                break TerminationReason::GeneratorExhausted;
            }
        };
        let mut texts: HashSet<String> = raw.iter().map(|r| r.text.clone()).collect();
        let mut ids: HashSet<String> = raw.iter().map(|r| r.id.clone()).collect();
        let mut added = Vec::new();
        for g in generated {
            if !texts.insert(g.text.clone()) {
                continue;
            }
            let mut id = format!("it{k}-{}", g.id);
            let mut bump = 1;
            while ids.contains(&id) {
                id = format!("it{k}-{}-{bump}", g.id);
                bump += 1;
            }
            ids.insert(id.clone());
            added.push(RawAssertion { id, text: g.text, iteration: Some(k) });
        }
        if added.is_empty() {
            history.push(no_progress(None));
            iteration = k;
            break TerminationReason::GeneratorExhausted;
        }
        let added_count = added.len();
        raw.extend(added);
        let pass = run_pass(ingest_all(&raw, cfg), index, &mut spec, sem, cfg)
            .map_err(|e| PipelineError::Iteration { iteration: k, source: Box::new(e) })?;
        history.push(IterationRecord {
            iteration: k,
            added_count,
            total_count: pass.n(),
            syntax_correct_count: pass.s(),
            match_degrees: pass.mapping.match_degree.clone(),
            generator_error: None,
        });
        iterations.push(IterationOutput { iteration: k, payload: Some(payload), pass });
        iteration = k;
    };
    let final_payload = build_payload(&iterations.last().expect("non-empty").pass.mapping, &spec, theta, iteration + 1);
    let state = LoopState { schema: "loop_state/v1".into(), iteration, assertions: raw, history, terminated_reason: reason };
    Ok(LoopOutcome { state, iterations, spec, final_payload })
}
