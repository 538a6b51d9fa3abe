#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology::dataset::MetricName;

fuzz_target!(|raw: &str| {
    if let Ok(name) = MetricName::parse(raw) {
        assert_eq!(name.raw, raw);
        assert!(!name.construct.is_empty());
    }
});
