//! Model documents carry network weights; a tampered file must be rejected
//! without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;

use engage_core::drl::TrainedPolicy;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = TrainedPolicy::from_json(text);
    }
});
