//! Splitting free specification text with a scripted provider.

use std::sync::Mutex;

use coverassert_core::semantic::{Provider, ProviderConfig, ProviderError, Semantics};
use coverassert_core::spec_model::{split_spec, SpecError};

/// Answers by prompt kind; records every prompt.
struct Scripted {
    split: String,
    points: Vec<String>,
    seen: Mutex<Vec<String>>,
}

impl Provider for Scripted {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        let mut seen = self.seen.lock().unwrap();
        seen.push(prompt.to_string());
        if prompt.starts_with("Your previous reply") {
            return Ok(self.split.clone());
        }
        if prompt.contains("Split it into functional modules") {
            return Ok(if seen.len() == 1 { "not json".into() } else { self.split.clone() });
        }
        let k = seen.iter().filter(|p| p.starts_with("Decompose")).count() - 1;
        Ok(self.points.get(k).cloned().unwrap_or_else(|| "[]".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        Ok(texts.iter().map(|t| vec![t.len() as f64, 1.0]).collect())
    }
}

fn sem(provider: Scripted) -> Semantics {
    let cfg = ProviderConfig { embed_dim: 2, ..ProviderConfig::default() };
    Semantics::with_provider(cfg, 0, Box::new(provider), None).unwrap()
}

const SPLIT: &str = r#"```json
{"subspecs": [
  {"id": "cmd", "title": "Command", "signals": ["go", "busy"], "description": "go starts a command; busy stays high until done."},
  {"id": "fifo", "title": "FIFO", "signals": ["push", "full"], "description": "push is ignored while full."}
]}
```"#;

#[test]
fn two_statements_become_two_points() {
    let s = sem(Scripted {
        split: SPLIT.into(),
        points: vec![
            r#"["go high sets busy.", "busy stays high until done."]"#.into(),
            r#"["push is ignored while full."]"#.into(),
        ],
        seen: Mutex::new(Vec::new()),
    });
    let spec = split_spec("Command block and a FIFO.", "toy", &s).unwrap();
    assert_eq!(spec.subspecs.len(), 2);
    let cmd = &spec.subspecs[0];
    assert_eq!(cmd.points.len(), 2);
    assert_eq!(cmd.points[0].id, "q-1");
    assert_eq!(cmd.points[1].text, "busy stays high until done.");
    assert_eq!(cmd.points[0].signals, vec!["busy".to_string(), "go".to_string()]);
    assert_eq!(spec.subspecs[1].points[0].id, "q-3");
    assert!(spec.subspecs.iter().flat_map(|s| &s.points).all(|p| p.embedding.len() == 2));
}

#[test]
fn unrepairable_reply_is_malformed() {
    let s = sem(Scripted { split: "still not json".into(), points: vec![], seen: Mutex::new(Vec::new()) });
    assert!(matches!(split_spec("spec", "toy", &s), Err(SpecError::MalformedProviderReply(_))));
}

#[test]
fn empty_text_is_rejected() {
    let s = sem(Scripted { split: SPLIT.into(), points: vec![], seen: Mutex::new(Vec::new()) });
    assert!(matches!(split_spec("  \n", "toy", &s), Err(SpecError::SchemaViolation { .. })));
}
