#![no_main]

use libfuzzer_sys::fuzz_target;
use metrology_service::api::{
    ActionRequest, CreateSession, DatasetUpload, DetectabilityRequest, FitRequest, ReliabilityRequest,
    SimulateRequest,
};

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<DatasetUpload>(data);
    let _ = serde_json::from_slice::<ReliabilityRequest>(data);
    let _ = serde_json::from_slice::<CreateSession>(data);
    let _ = serde_json::from_slice::<ActionRequest>(data);
    let _ = serde_json::from_slice::<FitRequest>(data);
    let _ = serde_json::from_slice::<SimulateRequest>(data);
    let _ = serde_json::from_slice::<DetectabilityRequest>(data);
});
