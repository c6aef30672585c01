//! One analysis pass: ingest, features, clustering, mapping.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::cluster::{cluster, ClusterError, ClusterResult};
use crate::config::RunConfig;
use crate::mapping::{group_intents, map_coverage, GroupIntent, MappingResult};
use crate::rtl_ast::{parse_rtl, AstError, AstIndex};
use crate::semantic::{sha256_hex, IntentRecord, SemanticError, Semantics};
use crate::spec_model::{load_spec, SpecError, SpecSet};
use crate::struct_features::{extract, StructuralFeatures};
use crate::sva::{count_syntax_correct, ingest_assertions, parse_assertions_json, Assertion, RawAssertion, SvaError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Ast { path: PathBuf, source: AstError },
    #[error("{}: {source}", path.display())]
    Sva { path: PathBuf, source: SvaError },
    #[error("{}: {source}", path.display())]
    Spec { path: PathBuf, source: SpecError },
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("iteration {iteration}: {source}")]
    Iteration { iteration: u32, source: Box<PipelineError> },
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })
}

const RTL_EXTENSIONS: [&str; 4] = ["v", "sv", "vh", "svh"];

/// RTL sources under `dir`, recursively, as `(relative path, text)` in
/// path order.
pub fn read_rtl_dir(dir: &Path) -> Result<Vec<(String, String)>, PipelineError> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<(), PipelineError> {
        let entries = fs::read_dir(dir).map_err(|source| PipelineError::Io { path: dir.into(), source })?;
        for e in entries {
            let e = e.map_err(|source| PipelineError::Io { path: dir.into(), source })?;
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else if p.extension().and_then(|x| x.to_str()).is_some_and(|x| RTL_EXTENSIONS.contains(&x)) {
                let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                out.push((rel, p));
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    files.into_iter().map(|(rel, p)| Ok((rel, read(&p)?))).collect()
}

/// Loaded, validated inputs plus content hashes keyed by stable labels.
pub struct Inputs {
    pub index: AstIndex,
    pub spec: SpecSet,
    pub seeds: Vec<RawAssertion>,
    pub input_hashes: BTreeMap<String, String>,
}

pub fn load_inputs(cfg: &RunConfig, sem: &Semantics) -> Result<Inputs, PipelineError> {
    let p = &cfg.paths;
    let mut input_hashes = BTreeMap::new();
    let rtl = read_rtl_dir(&p.rtl_dir)?;
    for (rel, text) in &rtl {
        input_hashes.insert(format!("rtl/{rel}"), sha256_hex(text.as_bytes()));
    }
    let index = parse_rtl(&rtl).map_err(|source| PipelineError::Ast { path: p.rtl_dir.clone(), source })?;

    let text = read(&p.assertions_file)?;
    input_hashes.insert("assertions".into(), sha256_hex(text.as_bytes()));
    let seeds = parse_assertions_json(&text).map_err(|source| PipelineError::Sva { path: p.assertions_file.clone(), source })?;
    // reject duplicates up front
    ingest_assertions(&seeds, &cfg.signal_filter()).map_err(|source| PipelineError::Sva { path: p.assertions_file.clone(), source })?;

    let text = read(&p.spec_file)?;
    input_hashes.insert("spec".into(), sha256_hex(text.as_bytes()));
    let spec = load_spec(&text, sem).map_err(|source| PipelineError::Spec { path: p.spec_file.clone(), source })?;
    Ok(Inputs { index, spec, seeds, input_hashes })
}

/// Everything computed in one pass.
#[derive(Debug, Clone)]
pub struct PassOutput {
    /// All assertions, including syntax-invalid ones.
    pub assertions: Vec<Assertion>,
    /// Indices (into `assertions`) of the syntax-correct ones, which are
    /// the only ones analysed.
    pub analysed: Vec<usize>,
    pub intents: Vec<IntentRecord>,
    pub features: StructuralFeatures,
    pub clusters: Option<ClusterResult>,
    pub groups: Vec<GroupIntent>,
    pub mapping: MappingResult,
}

impl PassOutput {
    pub fn n(&self) -> usize {
        self.assertions.len()
    }

    pub fn s(&self) -> usize {
        count_syntax_correct(&self.assertions)
    }

    pub fn analysed_ids(&self) -> Vec<String> {
        self.analysed.iter().map(|&i| self.assertions[i].id.clone()).collect()
    }
}

/// Runs features, clustering and mapping over `assertions`, crediting
/// coverage on `spec`.
pub fn run_pass(
    assertions: Vec<Assertion>,
    index: &AstIndex,
    spec: &mut SpecSet,
    sem: &Semantics,
    cfg: &RunConfig,
) -> Result<PassOutput, PipelineError> {
    let analysed: Vec<usize> = (0..assertions.len()).filter(|&i| assertions[i].syntax_ok).collect();
    let valid: Vec<Assertion> = analysed.iter().map(|&i| assertions[i].clone()).collect();
    for a in assertions.iter().filter(|a| !a.syntax_ok) {
        log::info!("assertion `{}` failed the syntax check and is not analysed", a.id);
    }
    let intents = sem.intent_records(&valid, &cfg.signal_filter())?;
    let features = extract(&valid, index);
    let (clusters, member_groups) = match valid.len() {
        0 => (None, Vec::new()),
        1 => (None, vec![vec![0]]),
        _ => {
            let semantic: Vec<Vec<f64>> = intents.iter().map(|r| r.embedding.clone()).collect();
            let c = cluster(&semantic, &features.q, &features.sd, &cfg.fusion, spec.subspecs.len())?;
            let g = c.groups();
            (Some(c), g)
        }
    };
    let groups = group_intents(&member_groups, &valid, &intents, sem)?;
    let mapping = map_coverage(&groups, &valid, &intents, spec, &cfg.mapping);
    Ok(PassOutput { assertions, analysed, intents, features, clusters, groups, mapping })
}
