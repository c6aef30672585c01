//! Coverage report, its Markdown rendering, and the artifact files of a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical;
use crate::cluster::clusters_json;
use crate::config::RunConfig;
use crate::feedback::{run_loop, GeneratorAdapter, GeneratorError, IterationRecord, LoopOutcome, TerminationReason};
use crate::pipeline::{load_inputs, PassOutput, PipelineError};
use crate::semantic::Semantics;
use crate::spec_model::SpecSet;
use crate::sva::RawAssertion;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRef {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveredPoint {
    pub id: String,
    pub covered_by: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspecCoverage {
    pub id: String,
    pub title: String,
    pub match_degree: f64,
    pub points_total: usize,
    pub covered: Vec<CoveredPoint>,
    pub uncovered: Vec<PointRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub min_degree: f64,
    pub mean_degree: f64,
    /// Assertions ingested.
    pub n: usize,
    /// Assertions passing the syntax check.
    pub s: usize,
    pub groups: usize,
    pub silhouette: Option<f64>,
    pub evr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub config_hash: String,
    pub input_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema: String,
    pub design: String,
    pub theta: f64,
    /// Every sub-spec strictly above `theta`.
    pub coverage_met: bool,
    pub subspecs: Vec<SubspecCoverage>,
    pub global: GlobalMetrics,
    pub history: Vec<IterationRecord>,
    pub terminated_reason: Option<TerminationReason>,
    pub provenance: Provenance,
}

impl CoverageReport {
    pub fn build(
        spec: &SpecSet,
        last: &PassOutput,
        history: Vec<IterationRecord>,
        terminated_reason: Option<TerminationReason>,
        cfg: &RunConfig,
        input_hashes: BTreeMap<String, String>,
    ) -> Self {
        let subspecs: Vec<SubspecCoverage> = spec
            .subspecs
            .iter()
            .map(|s| {
                let covered = s
                    .points
                    .iter()
                    .filter(|p| !p.covered_by.is_empty())
                    .map(|p| CoveredPoint { id: p.id.clone(), covered_by: p.covered_by.iter().cloned().collect() })
                    .collect::<Vec<_>>();
                let uncovered = s
                    .points
                    .iter()
                    .filter(|p| p.covered_by.is_empty())
                    .map(|p| PointRef { id: p.id.clone(), text: p.text.clone() })
                    .collect();
                SubspecCoverage {
                    id: s.id.clone(),
                    title: s.title.clone(),
                    match_degree: last.mapping.match_degree.get(&s.id).copied().unwrap_or(0.0),
                    points_total: s.points.len(),
                    covered,
                    uncovered,
                }
            })
            .collect();
        let degrees: Vec<f64> = subspecs.iter().map(|s| s.match_degree).collect();
        let min_degree = degrees.iter().copied().fold(f64::INFINITY, f64::min);
        let mean_degree = degrees.iter().sum::<f64>() / degrees.len().max(1) as f64;
        let theta = cfg.loop_.theta;
        CoverageReport {
            schema: "report/v1".into(),
            design: spec.design.clone(),
            theta,
            coverage_met: degrees.iter().all(|&d| d > theta),
            subspecs,
            global: GlobalMetrics {
                min_degree: if degrees.is_empty() { 0.0 } else { min_degree },
                mean_degree,
                n: last.n(),
                s: last.s(),
                groups: last.groups.len(),
                silhouette: last.clusters.as_ref().and_then(|c| c.silhouette),
                evr: last.clusters.as_ref().map(|c| c.evr),
            },
            history,
            terminated_reason,
            provenance: Provenance { tool_version: TOOL_VERSION.into(), config_hash: cfg.hash(), input_hashes },
        }
    }

    /// 0 when every sub-spec exceeds θ, 2 on a coverage gap.
    pub fn exit_code(&self) -> i32 {
        if self.coverage_met {
            0
        } else {
            2
        }
    }
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

/// Human-readable report; identical reports render identically.
pub fn render_markdown(r: &CoverageReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Coverage report: {}\n", r.design);
    let _ = writeln!(md, "| Sub-spec | Title | Covered | Points | Match degree |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for s in &r.subspecs {
        let _ = writeln!(md, "| {} | {} | {} | {} | {} |", s.id, s.title, s.covered.len(), s.points_total, pct(s.match_degree));
    }
    let g = &r.global;
    let _ = writeln!(
        md,
        "\nN = {} assertions, S = {} syntax-correct. Minimum degree {}, mean {}, threshold {}.",
        g.n,
        g.s,
        pct(g.min_degree),
        pct(g.mean_degree),
        r.theta
    );
    let verdict = if r.coverage_met { "met" } else { "not met" };
    let _ = writeln!(md, "Coverage threshold {verdict}.");
    if let Some(reason) = r.terminated_reason {
        let _ = writeln!(md, "Loop stopped: {}.", reason.as_str());
    }
    if !r.history.is_empty() {
        let _ = writeln!(md, "\n## Iterations\n");
        let _ = writeln!(md, "| Iteration | Added | N | S | Minimum degree |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        for h in &r.history {
            let min = h.match_degrees.values().copied().fold(f64::INFINITY, f64::min);
            let min = if h.match_degrees.is_empty() { 0.0 } else { min };
            let _ = writeln!(md, "| {} | {} | {} | {} | {} |", h.iteration, h.added_count, h.total_count, h.syntax_correct_count, pct(min));
        }
    }
    if r.subspecs.iter().any(|s| !s.uncovered.is_empty()) {
        let _ = writeln!(md, "\n## Uncovered points\n");
        for s in &r.subspecs {
            for p in &s.uncovered {
                let _ = writeln!(md, "- `{}` ({}): {}", p.id, s.id, p.text);
            }
        }
    }
    md
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing artifact {}", .0.display())]
    MissingArtifacts(PathBuf),
    #[error("{}: {source}", path.display())]
    BadArtifact { path: PathBuf, source: serde_json::Error },
}

pub struct RunOutput {
    pub report: CoverageReport,
    pub outcome: LoopOutcome,
    /// Whether the feedback loop was requested (vs. a single analysis).
    pub looped: bool,
}

struct NoGenerator;

impl GeneratorAdapter for NoGenerator {
    fn generate(&mut self, _: &crate::feedback::FeedbackPayload) -> Result<Vec<RawAssertion>, GeneratorError> {
        Ok(Vec::new())
    }
}

/// Single pass over the configured inputs, no feedback.
pub fn analyze(cfg: &RunConfig, sem: &Semantics) -> Result<RunOutput, RunError> {
    let mut single = cfg.clone();
    single.loop_.max_iterations = 0;
    execute(&single, cfg, sem, &mut NoGenerator, false)
}

/// Feedback loop over the configured inputs.
pub fn run_feedback(cfg: &RunConfig, sem: &Semantics, generator: &mut dyn GeneratorAdapter) -> Result<RunOutput, RunError> {
    execute(cfg, cfg, sem, generator, true)
}

fn execute(
    effective: &RunConfig,
    reported: &RunConfig,
    sem: &Semantics,
    generator: &mut dyn GeneratorAdapter,
    looped: bool,
) -> Result<RunOutput, RunError> {
    let inputs = load_inputs(effective, sem)?;
    let outcome = run_loop(effective, inputs.spec, &inputs.index, inputs.seeds, generator, sem)?;
    let (history, reason) = if looped {
        (outcome.state.history.clone(), Some(outcome.state.terminated_reason))
    } else {
        (outcome.state.history.clone(), None)
    };
    let report = CoverageReport::build(&outcome.spec, outcome.last(), history, reason, reported, inputs.input_hashes);
    Ok(RunOutput { report, outcome, looped })
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|source| RunError::Io { path: path.into(), source })
}

fn pass_clusters(pass: &PassOutput) -> Value {
    let ids = pass.analysed_ids();
    match &pass.clusters {
        Some(c) => clusters_json(c, &ids),
        None => json!({
            "schema": "clusters/v1",
            "assertion_ids": ids,
            "labels": vec![0; ids.len()],
            "k": ids.len().min(1),
            "silhouette": null,
            "semantic_labels": vec![-1; ids.len()],
            "evr": null,
        }),
    }
}

/// Writes `report.json`, `report.md`, `mapping.json`, `clusters.json` and
/// `payload.json`; loop runs add `loop_state.json` and `iter_<k>/`.
pub fn write_artifacts(out_dir: &Path, run: &RunOutput) -> Result<(), RunError> {
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io { path: out_dir.into(), source })?;
    let last = run.outcome.last();
    write(&out_dir.join("report.json"), &canonical::to_string(&run.report))?;
    write(&out_dir.join("report.md"), &render_markdown(&run.report))?;
    write(&out_dir.join("mapping.json"), &canonical::to_string(&last.mapping.to_json()))?;
    write(&out_dir.join("clusters.json"), &canonical::to_string(&pass_clusters(last)))?;
    write(&out_dir.join("payload.json"), &run.outcome.final_payload.to_canonical_json())?;
    if run.looped {
        write(&out_dir.join("loop_state.json"), &canonical::to_string(&run.outcome.state))?;
        for it in &run.outcome.iterations {
            let dir = out_dir.join(format!("iter_{}", it.iteration));
            fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
            write(&dir.join("mapping.json"), &canonical::to_string(&it.pass.mapping.to_json()))?;
            write(&dir.join("clusters.json"), &canonical::to_string(&pass_clusters(&it.pass)))?;
            if let Some(p) = &it.payload {
                write(&dir.join("payload.json"), &p.to_canonical_json())?;
            }
        }
    }
    Ok(())
}

/// Re-renders `report.md` from a previous run's `report.json`.
pub fn render_from_dir(out_dir: &Path) -> Result<String, RunError> {
    let path = out_dir.join("report.json");
    let text = fs::read_to_string(&path).map_err(|_| RunError::MissingArtifacts(path.clone()))?;
    let report: CoverageReport = serde_json::from_str(&text).map_err(|source| RunError::BadArtifact { path, source })?;
    Ok(render_markdown(&report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(uncovered: bool, history: usize) -> CoverageReport {
        let sub = SubspecCoverage {
            id: "cmd".into(),
            title: "Command".into(),
            match_degree: if uncovered { 0.5 } else { 1.0 },
            points_total: 2,
            covered: vec![CoveredPoint { id: "q-1".into(), covered_by: vec!["a1".into()] }],
            uncovered: if uncovered { vec![PointRef { id: "q-2".into(), text: "busy follows go".into() }] } else { vec![] },
        };
        CoverageReport {
            schema: "report/v1".into(),
            design: "toy".into(),
            theta: 0.85,
            coverage_met: !uncovered,
            subspecs: vec![sub],
            global: GlobalMetrics { min_degree: 1.0, mean_degree: 1.0, n: 2, s: 2, groups: 1, silhouette: None, evr: None },
            history: (0..history)
                .map(|k| IterationRecord {
                    iteration: k as u32,
                    added_count: 3,
                    total_count: 3 * (k + 1),
                    syntax_correct_count: 3 * (k + 1),
                    match_degrees: [("cmd".to_string(), 1.0)].into(),
                    generator_error: None,
                })
                .collect(),
            terminated_reason: Some(TerminationReason::ThresholdMet),
            provenance: Provenance { tool_version: "0".into(), config_hash: "h".into(), input_hashes: BTreeMap::new() },
        }
    }

    #[test]
    fn full_coverage_has_no_uncovered_section() {
        let md = render_markdown(&report(false, 1));
        assert!(md.contains("| cmd | Command | 1 | 2 | 100.0% |"));
        assert!(!md.contains("Uncovered"));
        assert_eq!(report(false, 1).exit_code(), 0);
    }

    #[test]
    fn timeline_rows_and_gap_listing() {
        let md = render_markdown(&report(true, 2));
        assert!(md.contains("| 0 | 3 | 3 | 3 |"));
        assert!(md.contains("| 1 | 3 | 6 | 6 |"));
        assert!(md.contains("- `q-2` (cmd): busy follows go"));
        assert_eq!(md, render_markdown(&report(true, 2)));
        assert_eq!(report(true, 2).exit_code(), 2);
    }
}
