//! Live-mode behaviour against a local OpenAI-compatible mock server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};

use coverassert_core::semantic::{ProviderConfig, ProviderMode, SemanticError, Semantics};
use coverassert_core::sva::{ingest_one, RawAssertion, SignalFilter};

/// Serves every request with `reply(path, body)`; returns the base URL and
/// a request counter.
fn serve(reply: impl Fn(&str, &Value) -> (u16, Value) + Send + Sync + 'static) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
            let mut len = 0;
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = h.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            counter.fetch_add(1, Ordering::SeqCst);
            let (status, value) = reply(&path, &serde_json::from_slice(&body).unwrap_or(Value::Null));
            let text = value.to_string();
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    (url, hits)
}

fn live(url: &str, dim: usize) -> ProviderConfig {
    ProviderConfig {
        mode: ProviderMode::Live,
        endpoint: Some(url.to_string()),
        embed_dim: dim,
        retry_base_ms: 1,
        timeout_secs: 5,
        ..ProviderConfig::default()
    }
}

fn embeddings(body: &Value, dim: usize) -> Value {
    let data: Vec<Value> = body["input"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| {
            let n = t.as_str().unwrap().len() as f64;
            let v: Vec<f64> = (0..dim).map(|i| n + i as f64).collect();
            json!({ "embedding": v })
        })
        .collect();
    json!({ "data": data })
}

#[test]
fn intent_text_passes_through_verbatim() {
    let (url, _) = serve(|path, body| {
        if path.ends_with("/chat/completions") {
            assert!(body["messages"][0]["content"].as_str().unwrap().contains("go |=> busy"));
            (200, json!({ "choices": [{ "message": { "content": "Whenever go rises, busy follows!" } }] }))
        } else {
            (200, embeddings(body, 8))
        }
    });
    let sem = Semantics::new(live(&url, 8), 0, None).unwrap();
    let a = ingest_one(
        &RawAssertion { id: "a1".into(), text: "assert property (@(posedge clk) go |=> busy);".into(), iteration: None },
        &SignalFilter::default(),
    );
    let records = sem.intent_records(&[a], &SignalFilter::default()).unwrap();
    assert_eq!(records[0].intent_text, "Whenever go rises, busy follows!");
    assert!(!records[0].fallback);
    let norm: f64 = records[0].embedding.iter().map(|x| x * x).sum();
    assert!((norm - 1.0).abs() < 1e-12);
}

#[test]
fn wrong_embedding_width_is_rejected() {
    let (url, _) = serve(|_, body| (200, embeddings(body, 9)));
    let sem = Semantics::new(live(&url, 8), 0, None).unwrap();
    match sem.embed_batch(&["x".to_string()]) {
        Err(SemanticError::DimensionMismatch { expected: 8, got: 9 }) => {}
        other => panic!("expected dimension mismatch, got {other:?}"),
    }
}

#[test]
fn server_errors_retry_then_fail() {
    let (url, hits) = serve(|_, _| (503, json!({})));
    let sem = Semantics::new(live(&url, 8), 0, None).unwrap();
    assert!(sem.embed_batch(&["x".to_string()]).is_err());
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn client_errors_do_not_retry() {
    let (url, hits) = serve(|_, _| (400, json!({ "error": "bad" })));
    let sem = Semantics::new(live(&url, 8), 0, None).unwrap();
    assert!(sem.embed_batch(&["x".to_string()]).is_err());
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn cached_embeddings_skip_the_server() {
    let (url, hits) = serve(|_, body| (200, embeddings(body, 8)));
    let dir = tempfile::tempdir().unwrap();
    let texts = vec!["fifo full blocks push".to_string(), "timer wraps".to_string()];
    let first = Semantics::new(live(&url, 8), 0, Some(dir.path())).unwrap().embed_batch(&texts).unwrap();
    let after_first = hits.load(Ordering::SeqCst);
    assert!(after_first >= 1);
    let sem = Semantics::new(live(&url, 8), 0, Some(dir.path())).unwrap();
    let second = sem.embed_batch(&texts).unwrap();
    assert_eq!(first, second);
    assert_eq!(hits.load(Ordering::SeqCst), after_first);
    assert_eq!(sem.stats().cache_hits, 2);
}
