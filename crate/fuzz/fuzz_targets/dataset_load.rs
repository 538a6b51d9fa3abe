#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology::dataset::{correlation_matrix, MetricDataset, MissingPolicy, ParseOptions};

fuzz_target!(|data: &[u8]| {
    // First byte picks the options so both parsing modes get exercised.
    let Some((&mode, rest)) = data.split_first() else { return };
    let delimiter = if mode & 1 == 0 { b',' } else { b'\t' };
    let options = ParseOptions { delimiter, strict: mode & 2 != 0 };
    if let Ok(ds) = MetricDataset::load(rest, options) {
        let again = MetricDataset::load_str(&ds.to_csv_string(), ParseOptions::default())
            .expect("written datasets load back");
        assert_eq!(again.n_entities(), ds.n_entities());
        assert_eq!(again.n_metrics(), ds.n_metrics());
        let _ = correlation_matrix(&ds, MissingPolicy::Pairwise);
    }
});
