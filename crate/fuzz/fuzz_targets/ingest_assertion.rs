#![no_main]

use coverassert_core::sva::{ingest_one, RawAssertion, SignalFilter};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let raw = RawAssertion { id: "f".into(), text: text.into(), iteration: None };
    let a = ingest_one(&raw, &SignalFilter::default());
    assert!(a.signals.windows(2).all(|w| w[0] < w[1]));
    if a.tokenize_error.is_some() {
        assert!(!a.syntax_ok);
    }
});
