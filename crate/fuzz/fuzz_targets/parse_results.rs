//! Fuzz the results-table reader used by `plot` and by resumed runs.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = borrowsim_core::results::parse_table(text);
    }
});
