#![no_main]

use hh_sliding::report::parse_summary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(summary) = parse_summary(text) {
            let json = summary.to_json().expect("a parsed summary serializes");
            assert_eq!(parse_summary(&json).expect("round trip"), summary);
        }
    }
});
