//! Fuzz the study-configuration parser: arbitrary bytes must either parse
//! into a valid config or return an error, never panic.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = borrowsim_core::config::parse_config_str(text);
    }
});
