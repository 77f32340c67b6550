#![no_main]

use hh_sliding::report::parse_field_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = parse_field_csv(text) {
            assert_eq!(table.field.n_t(), table.tmesh.len());
            assert_eq!(table.field.n_x(), table.xmesh.len());
        }
    }
});
