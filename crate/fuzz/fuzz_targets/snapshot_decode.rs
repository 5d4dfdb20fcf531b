#![no_main]

use libfuzzer_sys::fuzz_target;
use maflow_core::snapshot::decode_snapshot;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = decode_snapshot(data) {
        let bytes = snap.encode();
        assert_eq!(decode_snapshot(&bytes).ok(), Some(snap));
    }
});
