#![no_main]
use geobayes::io::parse_fits_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(fits) = parse_fits_csv(data) {
        for f in &fits {
            assert_eq!(f.params.len(), 7);
        }
    }
});
