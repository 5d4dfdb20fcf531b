//! Replays the fuzz corpus and mutated inputs through every decoder with the
//! same round-trip assertions the fuzz targets make.

use std::fs;
use std::path::{Path, PathBuf};

use maflow_core::config::parse_config_str;
use maflow_core::snapshot::{decode_snapshot, format_trace, parse_trace};
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files.into_iter().map(|p| (p.clone(), fs::read(p).unwrap())).collect()
}

fn config_case(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match parse_config_str(text, Path::new("/nonexistent")) {
        Ok(cfg) => {
            let again = cfg.to_toml().unwrap();
            let reparsed = parse_config_str(&again, Path::new("/nonexistent")).unwrap();
            assert_eq!(reparsed.to_toml().unwrap(), again);
            true
        }
        Err(_) => false,
    }
}

fn snapshot_case(data: &[u8]) -> bool {
    match decode_snapshot(data) {
        Ok(snap) => {
            assert_eq!(decode_snapshot(&snap.encode()).unwrap(), snap);
            true
        }
        Err(_) => false,
    }
}

fn trace_case(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match parse_trace(text) {
        Ok(rows) => {
            let out = format_trace(&rows).unwrap();
            assert_eq!(parse_trace(&out).unwrap(), rows);
            true
        }
        Err(_) => false,
    }
}

#[test]
fn config_corpus() {
    let mut accepted = 0;
    for (path, data) in corpus("config_parse") {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let ok = config_case(&data);
        if name == "positive_a.toml" || name == "unknown_key.toml" {
            assert!(!ok, "{name} should be rejected");
        }
        accepted += ok as usize;
    }
    assert!(accepted >= 4);
}

#[test]
fn snapshot_corpus() {
    for (path, data) in corpus("snapshot_decode") {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let ok = snapshot_case(&data);
        assert_eq!(ok, !(name.starts_with("truncated") || name.starts_with("header_only")), "{name}");
    }
}

#[test]
fn trace_corpus() {
    for (path, data) in corpus("trace_parse") {
        assert!(trace_case(&data), "{}", path.display());
    }
}

fn mutate(seed: &[u8], edits: &[(usize, u8)], cut: usize) -> Vec<u8> {
    let mut v = seed.to_vec();
    for &(pos, byte) in edits {
        if !v.is_empty() {
            let i = pos % v.len();
            v[i] = byte;
        }
    }
    let keep = if v.is_empty() { 0 } else { v.len() - cut % v.len() };
    v.truncate(keep);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn arbitrary_bytes_never_panic(data in proptest::collection::vec(any::<u8>(), 0..512)) {
        config_case(&data);
        snapshot_case(&data);
        trace_case(&data);
    }

    #[test]
    fn mutated_seeds_never_panic(
        which in 0usize..64,
        edits in proptest::collection::vec((any::<usize>(), any::<u8>()), 0..6),
        cut in 0usize..64,
    ) {
        let mut seeds: Vec<Vec<u8>> = Vec::new();
        for t in ["config_parse", "snapshot_decode", "trace_parse"] {
            seeds.extend(corpus(t).into_iter().map(|(_, d)| d));
        }
        let m = mutate(&seeds[which % seeds.len()], &edits, cut);
        config_case(&m);
        snapshot_case(&m);
        trace_case(&m);
    }
}
