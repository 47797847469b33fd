#![no_main]
use geobayes::io::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = Config::parse_bytes(data) {
        for k in cfg.keys() {
            assert!(cfg.get(k).is_some());
        }
    }
});
