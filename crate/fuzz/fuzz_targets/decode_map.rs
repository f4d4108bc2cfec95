#![no_main]

use libfuzzer_sys::fuzz_target;
use sht_core::io::{decode_map, encode_map};

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_map(data) {
        let bytes = encode_map(&map);
        let again = decode_map(&bytes).expect("re-encoded map must decode");
        assert_eq!(again.grid.n_pix, map.grid.n_pix);
        assert_eq!(encode_map(&again), bytes);
    }
});
