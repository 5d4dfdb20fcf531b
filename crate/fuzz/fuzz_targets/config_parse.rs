#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use maflow_core::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config_str(text, Path::new("/nonexistent")) {
            let again = cfg.to_toml().expect("valid configs serialize");
            let reparsed = parse_config_str(&again, Path::new("/nonexistent")).expect("round trip parses");
            assert_eq!(reparsed.to_toml().ok(), Some(again));
        }
    }
});
