//! CSV ingestion (both table schemas) must never panic, and every accepted
//! dataset must satisfy the loader's postconditions.

#![no_main]

use libfuzzer_sys::fuzz_target;

use kepler_sr::dataset::load_dataset_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dataset) = load_dataset_str(text) {
        for sample in &dataset.samples {
            assert!(sample.theta.is_finite());
            assert!(sample.theta > -std::f64::consts::PI - 1e-12);
            assert!(sample.theta <= std::f64::consts::PI + 1e-12);
            assert!(sample.r.is_finite() && sample.r > 0.0);
        }
    }
});
