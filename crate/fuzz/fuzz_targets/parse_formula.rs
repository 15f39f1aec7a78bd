//! The formula grammar must reject or accept any byte soup without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = engage_core::logic::parse_formula(text);
    }
});
