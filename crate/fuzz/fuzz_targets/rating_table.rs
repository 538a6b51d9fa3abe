#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology::reliability::{krippendorff_alpha, percent_agreement, RatingTable};

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = serde_json::from_slice::<RatingTable>(data) {
        if table.validate().is_ok() {
            if let Ok(report) = percent_agreement(&table) {
                assert!((0.0..=1.0).contains(&report.value));
            }
            if let Ok(report) = krippendorff_alpha(&table) {
                assert!(report.value <= 1.0 + 1e-9);
            }
        }
    }
});
