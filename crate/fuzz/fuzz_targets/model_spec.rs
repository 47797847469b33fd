#![no_main]
use geobayes::models::ModelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<ModelSpec>() {
        let again: ModelSpec = spec.to_string().parse().expect("display form parses");
        assert_eq!(spec, again);
    }
});
