#![no_main]

use coverassert_core::feedback::ScriptedGenerator;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = ScriptedGenerator::from_json(text);
});
