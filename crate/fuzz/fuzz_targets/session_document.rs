#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology::session::{RefinementSession, SessionDocument};

fuzz_target!(|data: &[u8]| {
    if let Ok(doc) = serde_json::from_slice::<SessionDocument>(data) {
        if let Ok(session) = RefinementSession::from_document(&doc) {
            let replayed = RefinementSession::from_document(&session.to_document()).expect("exports replay");
            assert_eq!(replayed.digests(), session.digests());
        }
    }
});
