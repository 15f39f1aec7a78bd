//! Transition files feed training; decoding must never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::drl::Transition;
use engage_core::jsonl::from_jsonl;
use engage_core::sim::TRANSITIONS_SCHEMA;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = from_jsonl::<Transition>(text, TRANSITIONS_SCHEMA);
    }
});
