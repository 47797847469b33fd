#![no_main]
use geobayes::io::{parse_dataset_csv, write_dataset_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((d, _)) = parse_dataset_csv(data) {
        let mut out = Vec::new();
        write_dataset_csv(&mut out, &d).unwrap();
        let (again, dups) = parse_dataset_csv(&out).expect("written dataset parses");
        assert_eq!(dups, 0);
        assert_eq!(again.coords(), d.coords());
        assert_eq!(again.values(), d.values());
    }
});
