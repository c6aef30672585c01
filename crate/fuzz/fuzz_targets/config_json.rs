#![no_main]

use std::path::Path;

use coverassert_core::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = RunConfig::parse(text, Path::new("cfg/config.json")) {
        cfg.hash();
    }
});
