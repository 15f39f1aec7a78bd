//! Frozen normalization constants are re-read by the train phase; decoding
//! must never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::pipeline::NormsDoc;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = NormsDoc::parse(text);
    }
});
