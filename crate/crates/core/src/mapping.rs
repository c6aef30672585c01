//! Group-to-sub-spec retrieval and assertion-to-point matching.
//!
//! Coverage is recorded on the points themselves (`covered_by`) and never
//! revoked, so match degrees only grow across iterations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::semantic::{cosine, prompts, IntentRecord, SemanticError, Semantics};
use crate::spec_model::{SpecSet, SubSpec};
use crate::sva::Assertion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    /// Weight of the semantic term in a point score.
    pub alpha: f64,
    /// Minimum score for an assertion to cover a point.
    pub sigma: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig { alpha: 0.6, sigma: 0.5 }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(format!("sigma must be in [0, 1], got {}", self.sigma));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupIntent {
    pub group_id: usize,
    pub description: String,
    pub signals: Vec<String>,
    pub members: Vec<String>,
    #[serde(skip)]
    pub embedding: Vec<f64>,
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets give 0.
pub fn jaccard<S: AsRef<str>>(a: &[S], b: &[S]) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// `alpha * max(cos, 0) + (1 - alpha) * jaccard`.
pub fn point_score(alpha: f64, cos: f64, jac: f64) -> f64 {
    (alpha * cos.max(0.0) + (1.0 - alpha) * jac).clamp(0.0, 1.0)
}

/// Builds one intent per group. `groups` holds indices into `assertions`
/// and `intents` (which are parallel). Offline, or when the live request
/// fails, the description is the member intents ordered by assertion id.
pub fn group_intents(
    groups: &[Vec<usize>],
    assertions: &[Assertion],
    intents: &[IntentRecord],
    sem: &Semantics,
) -> Result<Vec<GroupIntent>, SemanticError> {
    let mut out = Vec::with_capacity(groups.len());
    for (g, members) in groups.iter().enumerate() {
        let mut sorted: Vec<usize> = members.clone();
        sorted.sort_by(|&a, &b| assertions[a].id.cmp(&assertions[b].id));
        let signals: Vec<String> =
            sorted.iter().flat_map(|&i| assertions[i].signals.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
        let joined = sorted.iter().map(|&i| intents[i].intent_text.as_str()).collect::<Vec<_>>().join("\n");
        let description = if sem.is_live() {
            let listing = sorted.iter().map(|&i| assertions[i].text.as_str()).collect::<Vec<_>>().join("\n");
            let prompt = prompts::render(prompts::GROUP, &[("signals", &signals.join(", ")), ("assertions", &listing)]);
            match sem.complete(&prompt) {
                Ok(t) if !t.trim().is_empty() => t,
                other => {
                    if let Err(e) = other {
                        log::warn!("group {g} description fell back to member intents: {e}");
                    }
                    joined
                }
            }
        } else {
            joined
        };
        out.push(GroupIntent {
            group_id: g,
            description,
            signals,
            members: sorted.iter().map(|&i| assertions[i].id.clone()).collect(),
            embedding: Vec::new(),
        });
    }
    if !out.is_empty() {
        let texts: Vec<String> = out.iter().map(|g| g.description.clone()).collect();
        for (g, row) in out.iter_mut().zip(sem.embed_batch(&texts)?) {
            g.embedding = row;
        }
    }
    Ok(out)
}

const TIE: f64 = 1e-12;

/// Index of the sub-spec best matching `group`: highest cosine, then
/// highest signal Jaccard, then smallest id.
pub fn best_subspec(group: &GroupIntent, subspecs: &[SubSpec]) -> usize {
    let mut best = 0;
    let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (i, s) in subspecs.iter().enumerate() {
        let key = (cosine(&group.embedding, &s.embedding), jaccard(&group.signals, &s.signals));
        let better = if (key.0 - best_key.0).abs() > TIE {
            key.0 > best_key.0
        } else if (key.1 - best_key.1).abs() > TIE {
            key.1 > best_key.1
        } else {
            s.id < subspecs[best].id
        };
        if better {
            best = i;
            best_key = key;
        }
    }
    best
}

/// Sub-spec id for each group.
pub fn match_groups(groups: &[GroupIntent], subspecs: &[SubSpec]) -> BTreeMap<usize, String> {
    groups.iter().map(|g| (g.group_id, subspecs[best_subspec(g, subspecs)].id.clone())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairScore {
    pub assertion_id: String,
    pub point_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointAssignment {
    pub assertion_id: String,
    pub point_id: String,
    pub score: f64,
}

/// Scores one assertion against every point of `sub` and returns all pair
/// scores plus the best point (first in file order on exact ties) when it
/// reaches `sigma`.
pub fn score_points(
    assertion: &Assertion,
    intent: &IntentRecord,
    sub: &SubSpec,
    cfg: &MappingConfig,
) -> (Vec<PairScore>, Option<PointAssignment>) {
    let scores: Vec<PairScore> = sub
        .points
        .iter()
        .map(|p| PairScore {
            assertion_id: assertion.id.clone(),
            point_id: p.id.clone(),
            score: point_score(cfg.alpha, cosine(&intent.embedding, &p.embedding), jaccard(&assertion.signals, &p.signals)),
        })
        .collect();
    let mut best: Option<&PairScore> = None;
    for s in &scores {
        if best.is_none_or(|b| s.score > b.score) {
            best = Some(s);
        }
    }
    let assigned = best.filter(|b| b.score >= cfg.sigma).map(|b| PointAssignment {
        assertion_id: b.assertion_id.clone(),
        point_id: b.point_id.clone(),
        score: b.score,
    });
    (scores, assigned)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingResult {
    pub group_to_subspec: BTreeMap<usize, String>,
    pub point_assignments: Vec<PointAssignment>,
    pub pair_scores: Vec<PairScore>,
    pub match_degree: BTreeMap<String, f64>,
    pub uncovered: BTreeMap<String, Vec<String>>,
}

impl MappingResult {
    pub fn min_degree(&self) -> f64 {
        self.match_degree.values().copied().fold(f64::INFINITY, f64::min)
    }

    /// `mapping/v1` document.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("mapping serializes");
        v["schema"] = "mapping/v1".into();
        v
    }
}

/// Covered fraction and uncovered point ids per sub-spec.
pub fn compute_match_degree(spec: &SpecSet) -> (BTreeMap<String, f64>, BTreeMap<String, Vec<String>>) {
    let mut degree = BTreeMap::new();
    let mut uncovered = BTreeMap::new();
    for s in &spec.subspecs {
        let open: Vec<String> = s.points.iter().filter(|p| p.covered_by.is_empty()).map(|p| p.id.clone()).collect();
        let total = s.points.len();
        let d = if total == 0 { 0.0 } else { (total - open.len()) as f64 / total as f64 };
        degree.insert(s.id.clone(), d);
        uncovered.insert(s.id.clone(), open);
    }
    (degree, uncovered)
}

/// Maps groups to sub-specs, scores each member against the points of its
/// group's sub-spec, then records coverage on `spec`. `groups` indexes
/// `assertions`/`intents`.
pub fn map_coverage(
    groups: &[GroupIntent],
    assertions: &[Assertion],
    intents: &[IntentRecord],
    spec: &mut SpecSet,
    cfg: &MappingConfig,
) -> MappingResult {
    let group_to_subspec = match_groups(groups, &spec.subspecs);
    let by_id: BTreeMap<&str, usize> = assertions.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    let mut pair_scores = Vec::new();
    let mut point_assignments = Vec::new();
    for g in groups {
        let sub = spec.subspec(&group_to_subspec[&g.group_id]).expect("mapped sub-spec exists");
        for m in &g.members {
            let i = by_id[m.as_str()];
            let (scores, assigned) = score_points(&assertions[i], &intents[i], sub, cfg);
            pair_scores.extend(scores);
            point_assignments.extend(assigned);
        }
    }
    point_assignments.sort_by(|a, b| a.assertion_id.cmp(&b.assertion_id));
    pair_scores.sort_by(|a, b| a.assertion_id.cmp(&b.assertion_id).then_with(|| a.point_id.cmp(&b.point_id)));
    // single commit phase after all scoring
    for a in &point_assignments {
        for s in spec.subspecs.iter_mut() {
            if let Some(p) = s.points.iter_mut().find(|p| p.id == a.point_id) {
                p.covered_by.insert(a.assertion_id.clone());
            }
        }
    }
    let (match_degree, uncovered) = compute_match_degree(spec);
    MappingResult { group_to_subspec, point_assignments, pair_scores, match_degree, uncovered }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::FunctionalPoint;

    fn sub(id: &str, signals: &[&str], embedding: Vec<f64>) -> SubSpec {
        SubSpec {
            id: id.into(),
            title: id.into(),
            signals: signals.iter().map(|s| s.to_string()).collect(),
            description: "d".into(),
            points: Vec::new(),
            embedding,
        }
    }

    fn group(signals: &[&str], embedding: Vec<f64>) -> GroupIntent {
        GroupIntent {
            group_id: 0,
            description: String::new(),
            signals: signals.iter().map(|s| s.to_string()).collect(),
            members: Vec::new(),
            embedding,
        }
    }

    #[test]
    fn weighted_score_by_hand() {
        assert!((point_score(0.6, 0.5, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(point_score(0.6, -0.7, 0.0), 0.0);
        assert_eq!(point_score(0.6, 1.0, 1.0), 1.0);
    }

    #[test]
    fn jaccard_cases() {
        assert_eq!(jaccard(&["a", "b"], &["b", "c"]), 1.0 / 3.0);
        assert_eq!(jaccard::<&str>(&[], &[]), 0.0);
    }

    #[test]
    fn cosine_tie_broken_by_jaccard_then_id() {
        let e = vec![1.0, 0.0];
        let subs = vec![sub("b", &["x"], e.clone()), sub("a", &["p", "q", "r", "s"], e.clone())];
        let g = group(&["p", "q", "r", "s", "t"], e.clone());
        assert_eq!(subs[best_subspec(&g, &subs)].id, "a");
        let subs = vec![sub("b", &["x"], e.clone()), sub("a", &["x"], e.clone())];
        assert_eq!(subs[best_subspec(&group(&["x"], e), &subs)].id, "a");
    }

    #[test]
    fn degrees_and_uncovered() {
        let mut s = sub("m", &[], vec![]);
        for k in 0..4 {
            let mut covered_by = BTreeSet::new();
            if k < 3 {
                covered_by.insert(format!("a{k}"));
            }
            s.points.push(FunctionalPoint { id: format!("p{k}"), text: "t".into(), signals: vec![], embedding: vec![], covered_by });
        }
        let spec = SpecSet { design: "d".into(), subspecs: vec![s] };
        let (d, u) = compute_match_degree(&spec);
        assert_eq!(d["m"], 0.75);
        assert_eq!(u["m"], vec!["p3"]);
    }
}
