#![no_main]

use coverassert_core::sva::parse_assertions_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_assertions_json(text);
});
