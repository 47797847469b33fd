#![no_main]
use geobayes::io::{parse_variogram_table_csv, write_variogram_table_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = parse_variogram_table_csv(data) {
        let mut first = Vec::new();
        write_variogram_table_csv(&mut first, &t).unwrap();
        let again = parse_variogram_table_csv(&first).expect("written table parses");
        let mut second = Vec::new();
        write_variogram_table_csv(&mut second, &again).unwrap();
        assert_eq!(first, second);
    }
});
