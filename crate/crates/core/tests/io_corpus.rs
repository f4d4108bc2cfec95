use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use sht_core::io::{decode_alm, decode_map, encode_alm, encode_map};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed-"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn check_map(bytes: &[u8]) {
    if let Ok(map) = decode_map(bytes) {
        let enc = encode_map(&map);
        assert_eq!(encode_map(&decode_map(&enc).unwrap()), enc);
    }
}

fn check_alm(bytes: &[u8]) {
    if let Ok(alm) = decode_alm(bytes) {
        let enc = encode_alm(&alm);
        assert_eq!(encode_alm(&decode_alm(&enc).unwrap()), enc);
    }
}

#[test]
fn map_seeds() {
    let all = seeds("decode_map");
    assert!(all.len() >= 2);
    for (name, bytes) in &all {
        let ok = decode_map(bytes);
        assert_eq!(ok.is_ok(), !name.contains("truncated"), "{name}");
        if let Ok(map) = ok {
            assert_eq!(&encode_map(&map), bytes, "{name}");
        }
    }
}

#[test]
fn alm_seeds() {
    let all = seeds("decode_alm");
    assert!(all.len() >= 2);
    for (name, bytes) in &all {
        let ok = decode_alm(bytes);
        assert_eq!(ok.is_ok(), !name.contains("truncated"), "{name}");
        if let Ok(alm) = ok {
            assert_eq!(&encode_alm(&alm), bytes, "{name}");
        }
    }
}

#[test]
fn every_prefix_is_handled() {
    for (_, bytes) in seeds("decode_map") {
        for n in 0..=bytes.len() {
            check_map(&bytes[..n]);
        }
    }
    for (_, bytes) in seeds("decode_alm") {
        for n in 0..=bytes.len() {
            check_alm(&bytes[..n]);
        }
    }
}

proptest! {
    #[test]
    fn mutated_seeds_never_panic(pick in 0usize..8, edits in prop::collection::vec((any::<usize>(), any::<u8>()), 1..6)) {
        let mut all: Vec<(bool, Vec<u8>)> = seeds("decode_map").into_iter().map(|(_, b)| (true, b)).collect();
        all.extend(seeds("decode_alm").into_iter().map(|(_, b)| (false, b)));
        let (is_map, mut bytes) = all[pick % all.len()].clone();
        for (pos, val) in edits {
            let i = pos % bytes.len();
            bytes[i] = val;
        }
        if is_map { check_map(&bytes) } else { check_alm(&bytes) }
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        check_map(&bytes);
        check_alm(&bytes);
        let mut framed = b"SHTMAP1\n".to_vec();
        framed.extend_from_slice(&bytes);
        check_map(&framed);
        let mut framed = b"SHTALM1\n".to_vec();
        framed.extend_from_slice(&bytes);
        check_alm(&framed);
    }
}
