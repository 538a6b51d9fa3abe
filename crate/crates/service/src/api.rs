//! Request and response bodies. Shared with the command-line front end so
//! that `--json` output has the same shape as the HTTP API.

use metrology::cfa::{ConfirmatorySpec, FitOptions, MeasurementModel};
use metrology::dataset::{MetricDataset, MetricName, MissingPolicy, Transformation};
use metrology::efa::{EfaConfig, ExpectedMap, ParallelConfig};
use metrology::reliability::Level;
use metrology::session::{AutoRefineOutcome, RefinementSession, RefinementStep, SessionState};
use metrology::truescore::{DetectabilityReport, HistogramBin, SampleSizePlan, SampleSummary};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Largest simulation the API will run in one request.
pub const MAX_SIMULATION_SIZE: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DatasetUpload {
    /// Delimiter-separated text with a header row; first column is the id.
    pub csv: String,
    /// Single-character delimiter; `,` when absent.
    #[serde(default)]
    pub delimiter: Option<char>,
    /// Reject non-numeric cells instead of treating them as missing.
    #[serde(default)]
    pub strict: bool,
    /// Reversed indicators to flip right after loading.
    #[serde(default)]
    pub reversed: Vec<Transformation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DatasetSummary {
    pub id: String,
    pub id_header: String,
    pub n_entities: usize,
    pub n_metrics: usize,
    pub missing_cells: usize,
    pub metrics: Vec<MetricName>,
    pub provenance: Vec<Transformation>,
}

impl DatasetSummary {
    pub fn of(id: &str, ds: &MetricDataset) -> Self {
        Self {
            id: id.to_string(),
            id_header: ds.id_header.clone(),
            n_entities: ds.n_entities(),
            n_metrics: ds.n_metrics(),
            missing_cells: ds.missing_count(),
            metrics: ds.columns.clone(),
            provenance: ds.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PolicyQuery {
    #[serde(default)]
    pub policy: MissingPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AdviceRequest {
    #[serde(default)]
    pub parallel: ParallelConfig,
    /// Factor count expected from theory, echoed in the advice.
    #[serde(default)]
    pub theory: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AuditRequest {
    /// Metric → construct; taken from the header prefixes when absent.
    #[serde(default)]
    pub assignment: Option<ExpectedMap>,
    #[serde(default)]
    pub policy: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "coefficient", rename_all = "snake_case")]
pub enum ReliabilityRequest {
    /// Rows are entities, columns are items.
    CronbachAlpha {
        items: Vec<Vec<f64>>,
        #[serde(default)]
        labels: Vec<String>,
    },
    /// Alpha over named metrics of an uploaded dataset (complete cases).
    CronbachAlphaMetrics { dataset: String, metrics: Vec<String> },
    /// Rows are units, columns are raters; `null` marks a missing rating.
    PercentAgreement { ratings: Vec<Vec<Option<f64>>> },
    KrippendorffAlpha {
        ratings: Vec<Vec<Option<f64>>>,
        #[serde(default)]
        level: Level,
    },
    CompositeReliability { loadings: Vec<f64>, uniquenesses: Vec<f64> },
    OmegaTotal { loadings: Vec<f64>, uniquenesses: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CreateSession {
    pub dataset: String,
    /// Metric → construct; taken from the header prefixes when absent.
    #[serde(default)]
    pub expected: Option<ExpectedMap>,
    pub k: usize,
    #[serde(default)]
    pub config: EfaConfig,
}

/// A session as seen by clients: the current state plus the step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionView {
    pub id: String,
    pub expected: ExpectedMap,
    pub current: SessionState,
    pub history: Vec<RefinementStep>,
    /// Present after an `auto_refine` action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auto_refine: Option<AutoRefineOutcome>,
}

impl SessionView {
    pub fn of(session: &RefinementSession) -> Self {
        Self {
            id: session.id.clone(),
            expected: session.expected().clone(),
            current: session.current().clone(),
            history: session.history().to_vec(),
            auto_refine: None,
        }
    }
}

fn default_max_steps() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ActionRequest {
    Drop {
        metric: String,
        #[serde(default)]
        rationale: String,
    },
    Undo,
    SetK {
        k: usize,
        #[serde(default)]
        rationale: String,
    },
    SetThreshold {
        name: String,
        value: f64,
        #[serde(default)]
        rationale: String,
    },
    AutoRefine {
        #[serde(default = "default_max_steps")]
        max_steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FitRequest {
    pub dataset: String,
    pub spec: ConfirmatorySpec,
    #[serde(default)]
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScoresRequest {
    pub dataset: String,
    pub model: MeasurementModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ScoresResult {
    pub entity_ids: Vec<String>,
    pub factors: Vec<String>,
    /// One row per entity; `null` where a model metric is missing.
    pub scores: Vec<Option<Vec<f64>>>,
}

fn default_bins() -> usize {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulateRequest {
    pub true_score: f64,
    pub random_sd: f64,
    #[serde(default)]
    pub systematic_offset: f64,
    #[serde(default)]
    pub seed: u64,
    pub n: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Return every draw, not just the summary and histogram.
    #[serde(default)]
    pub include_samples: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimulateResult {
    pub summary: SampleSummary,
    pub histogram: Vec<HistogramBin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DetectabilityRequest {
    pub effect: f64,
    pub per_obs_sd: f64,
    /// Significance level for the sample-size plan.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Target power for the sample-size plan.
    #[serde(default)]
    pub power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DetectabilityResult {
    pub detectability: DetectabilityReport,
    /// Present when both `alpha` and `power` were given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<SampleSizePlan>,
}
