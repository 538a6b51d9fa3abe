//! JSON schemas for every request and result body, served at `/schema`.

use metrology::cfa::{ConfirmatorySpec, MeasurementModel};
use metrology::dataset::CorrelationMatrix;
use metrology::efa::{AdequacyReport, FactorCountAdvice, FactorSolution, ScaleAudit};
use metrology::reliability::ReliabilityReport;
use metrology::session::SessionDocument;
use schemars::schema_for;
use serde_json::{Map, Value};

use crate::api::*;
use crate::envelope::ApiError;

macro_rules! collect {
    ($($name:literal => $ty:ty),* $(,)?) => {{
        let mut map = Map::new();
        $(map.insert($name.to_string(), serde_json::to_value(schema_for!($ty)).expect("schema serializes"));)*
        map
    }};
}

/// Name → JSON schema. Responses are wrapped in the envelope
/// `{ok, result, error}`; `error` follows the `ApiError` schema.
pub fn schemas() -> Value {
    Value::Object(collect! {
        "ApiError" => ApiError,
        "DatasetUpload" => DatasetUpload,
        "DatasetSummary" => DatasetSummary,
        "CorrelationMatrix" => CorrelationMatrix,
        "AdequacyReport" => AdequacyReport,
        "AdviceRequest" => AdviceRequest,
        "FactorCountAdvice" => FactorCountAdvice,
        "AuditRequest" => AuditRequest,
        "ScaleAudit" => ScaleAudit,
        "FactorSolution" => FactorSolution,
        "ReliabilityRequest" => ReliabilityRequest,
        "ReliabilityReport" => ReliabilityReport,
        "CreateSession" => CreateSession,
        "SessionView" => SessionView,
        "ActionRequest" => ActionRequest,
        "SessionDocument" => SessionDocument,
        "ConfirmatorySpec" => ConfirmatorySpec,
        "FitRequest" => FitRequest,
        "MeasurementModel" => MeasurementModel,
        "ScoresRequest" => ScoresRequest,
        "ScoresResult" => ScoresResult,
        "SimulateRequest" => SimulateRequest,
        "SimulateResult" => SimulateResult,
        "DetectabilityRequest" => DetectabilityRequest,
        "DetectabilityResult" => DetectabilityResult,
    })
}
