//! Replays the checked-in fuzz corpus through the same entry points the
//! fuzz targets drive, so the seeds stay valid under a plain `cargo test`.

use std::path::PathBuf;

use metrology::cfa::{export_formulas, import_formulas, ConfirmatorySpec};
use metrology::dataset::{MetricDataset, MetricName, ParseOptions};
use metrology::reliability::{krippendorff_alpha, RatingTable};
use metrology::session::{RefinementSession, SessionDocument};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.display().to_string(), std::fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn dataset_seeds_load() {
    for (name, bytes) in seeds("dataset_load") {
        let (&mode, rest) = bytes.split_first().unwrap();
        let delimiter = if mode & 1 == 0 { b',' } else { b'\t' };
        let ds = MetricDataset::load(rest, ParseOptions { delimiter, strict: mode & 2 != 0 });
        assert!(ds.is_ok(), "{name}: {ds:?}");
    }
}

#[test]
fn metric_name_seeds_keep_their_raw_text() {
    for (name, bytes) in seeds("metric_name") {
        let raw = String::from_utf8(bytes).unwrap();
        if let Ok(parsed) = MetricName::parse(&raw) {
            assert_eq!(parsed.raw, raw, "{name}");
        }
    }
}

#[test]
fn session_seeds_replay() {
    for (name, bytes) in seeds("session_document") {
        let doc: SessionDocument = serde_json::from_slice(&bytes).unwrap();
        let session = RefinementSession::from_document(&doc).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(session.history().len(), doc.steps.len());
    }
}

#[test]
fn spec_and_model_seeds_parse() {
    for (name, bytes) in seeds("confirmatory_spec") {
        let spec: ConfirmatorySpec = serde_json::from_slice(&bytes).unwrap();
        assert!(spec.validate().is_ok(), "{name}");
    }
    for (name, bytes) in seeds("model_document") {
        let model = import_formulas(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(import_formulas(&export_formulas(&model)).unwrap(), model);
    }
}

#[test]
fn rating_seeds_are_valid_tables() {
    for (name, bytes) in seeds("rating_table") {
        let table: RatingTable = serde_json::from_slice(&bytes).unwrap();
        assert!(krippendorff_alpha(&table).is_ok(), "{name}");
    }
}
