#![no_main]

use libfuzzer_sys::fuzz_target;
use sht_core::io::{decode_alm, encode_alm};

fuzz_target!(|data: &[u8]| {
    if let Ok(alm) = decode_alm(data) {
        let bytes = encode_alm(&alm);
        let again = decode_alm(&bytes).expect("re-encoded coefficients must decode");
        assert_eq!(again.lmax(), alm.lmax());
        assert_eq!(encode_alm(&again), bytes);
    }
});
