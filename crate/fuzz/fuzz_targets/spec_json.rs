#![no_main]

use coverassert_core::spec_model::parse_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(spec) = parse_spec(text) {
        assert!(!spec.subspecs.is_empty());
    }
});
