#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology::cfa::{export_formulas, import_formulas};

fuzz_target!(|text: &str| {
    if let Ok(model) = import_formulas(text) {
        let again = import_formulas(&export_formulas(&model)).expect("exported models import");
        assert_eq!(again.metrics, model.metrics);
        assert_eq!(again.factors, model.factors);
    }
});
