#![no_main]
use geobayes::io::{parse_variogram_csv, write_variogram_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = parse_variogram_csv(data) {
        let mut first = Vec::new();
        write_variogram_csv(&mut first, &v).unwrap();
        let again = parse_variogram_csv(&first).expect("written variogram parses");
        let mut second = Vec::new();
        write_variogram_csv(&mut second, &again).unwrap();
        assert_eq!(first, second);
    }
});
