//! Config files are user input; parse plus validate must never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ExperimentConfig::parse(text);
    }
});
