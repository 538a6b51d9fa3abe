#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology::cfa::ConfirmatorySpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<ConfirmatorySpec>(data) {
        let _ = spec.validate();
        let text = serde_json::to_string(&spec).expect("specs serialize");
        let back: ConfirmatorySpec = serde_json::from_str(&text).expect("specs round-trip");
        assert_eq!(back, spec);
    }
});
