//! Threshold tables are re-read by the trial phase; decoding must never
//! panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::bkt::ThresholdTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ThresholdTable::parse(text);
    }
});
