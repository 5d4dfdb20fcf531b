#![no_main]

use libfuzzer_sys::fuzz_target;
use maflow_core::snapshot::{format_trace, parse_trace};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_trace(text) {
            if let Ok(out) = format_trace(&rows) {
                assert_eq!(parse_trace(&out).ok(), Some(rows));
            }
        }
    }
});
