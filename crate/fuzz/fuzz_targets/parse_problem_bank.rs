//! Level documents arrive from disk; parsing must never panic, and anything
//! accepted has passed full proof validation.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::logic::ProblemBank;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ProblemBank::parse_level("fuzz", text);
    }
});
