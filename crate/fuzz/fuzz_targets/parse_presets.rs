//! Fuzz the preset-file parser, including the derivation layer that pools
//! multi-trial sources and converts ratio CIs to the log scale.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = borrowsim_core::presets::parse_presets_str(text);
    }
});
