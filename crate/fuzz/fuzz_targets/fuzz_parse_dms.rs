//! Sexagesimal angle parsing must never panic and accepted values must be
//! finite degrees.

#![no_main]

use libfuzzer_sys::fuzz_target;

use kepler_sr::dataset::parse_dms;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(degrees) = parse_dms(text) {
        assert!(degrees.is_finite(), "accepted non-finite angle from `{text}`");
    }
});
