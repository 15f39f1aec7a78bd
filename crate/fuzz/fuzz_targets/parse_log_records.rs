//! Session files are re-read by later phases; a corrupted file must fail
//! cleanly, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::jsonl::from_jsonl;
use engage_core::sim::{AttemptRow, SESSIONS_SCHEMA};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = from_jsonl::<AttemptRow>(text, SESSIONS_SCHEMA);
    }
});
