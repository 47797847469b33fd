#![no_main]
use geobayes::io::{decode_simbatch, encode_sim_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_simbatch(data) {
        assert_eq!(encode_sim_matrix(&m).unwrap(), data);
    }
});
