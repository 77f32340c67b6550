#![no_main]

use hh_sliding::config::{parse_config, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(overrides) = parse_config(text) {
            let _ = RunConfig::resolve(overrides);
        }
    }
});
