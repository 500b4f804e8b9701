//! Fuzz the compact method-spec decoder embedded in results rows.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = borrowsim_core::results::decode_method(text);
    }
});
