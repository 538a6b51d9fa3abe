//! Stepwise EFA refinement: diagnose, drop the worst metric, re-run, with
//! a history that supports undo, replay and export to a confirmatory spec.
//!
//! Dropped metrics are tombstoned; the dataset itself never changes. The
//! current solution is always `run_efa` over the surviving metrics with the
//! session's current factor count and thresholds.

use std::collections::BTreeMap;
use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cfa::{ChecklistItem, ConfirmatorySpec, EfaProvenance, FactorSpec};
use crate::dataset::MetricDataset;
use crate::efa::{diagnose, label_factors, run_efa, EfaConfig, EfaError, ExpectedMap, FactorSolution, Problem};

pub const SESSION_SCHEMA_VERSION: u32 = 1;
/// Below this share of explained variance the stop report warns.
pub const MIN_VARIANCE_EXPLAINED: f64 = 0.6;
/// Minimum metrics per factor.
pub const MIN_METRICS_PER_FACTOR: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error(transparent)]
    Efa(#[from] EfaError),
    #[error("metric `{0}` is not in the session")]
    UnknownMetric(String),
    #[error("metric `{0}` was already dropped")]
    AlreadyDropped(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("replayed step {step} produced digest {found}, recorded {recorded}")]
    DigestMismatch { step: usize, recorded: String, found: String },
    #[error("unsupported session schema version {0}")]
    UnsupportedVersion(u32),
}

/// A recorded refinement action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Drop { metric: String },
    SetK { k: usize },
    SetThreshold { name: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StopReport {
    /// No open problems, enough variance explained, every factor ≥ 3 metrics.
    pub clean: bool,
    pub open_problems: usize,
    pub variance_explained: f64,
    /// Factors (by index) with fewer than three assigned metrics.
    pub small_factors: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RefinementStep {
    pub action: Action,
    pub rationale: String,
    pub automatic: bool,
    pub digest: String,
    pub problems_after: Vec<Problem>,
    pub stop: StopReport,
    pub warnings: Vec<String>,
}

/// Everything derived from (dataset, expected, history).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionState {
    pub k: usize,
    pub config: EfaConfig,
    pub dropped: Vec<String>,
    pub solution: FactorSolution,
    pub factor_labels: Vec<Option<String>>,
    pub problems: Vec<Problem>,
    pub stop: StopReport,
    pub digest: String,
}

fn evaluate(
    ds: &MetricDataset,
    expected: &ExpectedMap,
    k: usize,
    config: EfaConfig,
    dropped: Vec<String>,
) -> Result<SessionState, SessionError> {
    let active = ds.without(&dropped).map_err(EfaError::from)?;
    let solution = run_efa(&active, k, &config)?;
    let problems = diagnose(&solution, expected, &config.thresholds)?;
    let factor_labels = label_factors(&solution, expected);
    let open = problems.iter().filter(|p| !p.retain).count();
    let small_factors: Vec<usize> = (0..solution.n_factors())
        .filter(|&f| solution.metrics_on(f).len() < MIN_METRICS_PER_FACTOR)
        .collect();
    let mut warnings = Vec::new();
    if solution.variance_explained < MIN_VARIANCE_EXPLAINED {
        warnings.push(format!(
            "solution explains {:.0}% of the variance, less than 60%; consider more factors",
            solution.variance_explained * 100.0
        ));
    }
    for &f in &small_factors {
        warnings.push(format!("factor {} has fewer than {MIN_METRICS_PER_FACTOR} metrics", f + 1));
    }
    let stop = StopReport {
        clean: open == 0 && solution.variance_explained >= MIN_VARIANCE_EXPLAINED && small_factors.is_empty(),
        open_problems: open,
        variance_explained: solution.variance_explained,
        small_factors,
        warnings,
    };
    Ok(SessionState {
        k,
        config,
        dropped,
        digest: solution.digest(),
        solution,
        factor_labels,
        problems,
        stop,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementSession {
    pub id: String,
    dataset: Arc<MetricDataset>,
    expected: ExpectedMap,
    history: Vec<RefinementStep>,
    /// State after each step; index 0 is the initial state.
    snapshots: Vec<SessionState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AutoRefineOutcome {
    pub steps: usize,
    pub clean: bool,
    pub stopped_because: String,
}

impl RefinementSession {
    /// Runs and diagnoses the initial solution. `expected` must name a
    /// construct for every metric in the dataset.
    pub fn new(
        dataset: Arc<MetricDataset>,
        expected: ExpectedMap,
        k: usize,
        config: EfaConfig,
    ) -> Result<Self, SessionError> {
        if let Some(missing) = dataset.columns.iter().find(|c| !expected.contains_key(&c.raw)) {
            return Err(EfaError::MissingExpected(missing.raw.clone()).into());
        }
        let initial = evaluate(&dataset, &expected, k, config, Vec::new())?;
        let mut h = Sha256::new();
        h.update(dataset.to_csv_string());
        h.update(serde_json::to_vec(&expected).unwrap_or_default());
        h.update(initial.digest.as_bytes());
        let id = hex::encode(&h.finalize()[..8]);
        Ok(Self { id, dataset, expected, history: Vec::new(), snapshots: vec![initial] })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn dataset(&self) -> &MetricDataset {
        &self.dataset
    }

    pub fn expected(&self) -> &ExpectedMap {
        &self.expected
    }

    pub fn history(&self) -> &[RefinementStep] {
        &self.history
    }

    pub fn current(&self) -> &SessionState {
        self.snapshots.last().expect("initial snapshot always present")
    }

    pub fn initial(&self) -> &SessionState {
        &self.snapshots[0]
    }

    /// Applies an analyst action and records it with its rationale.
    pub fn apply(&mut self, action: Action, rationale: impl Into<String>) -> Result<&RefinementStep, SessionError> {
        self.apply_inner(action, rationale.into(), false)
    }

    fn apply_inner(&mut self, action: Action, rationale: String, automatic: bool) -> Result<&RefinementStep, SessionError> {
        let cur = self.current();
        let (mut k, mut config, mut dropped) = (cur.k, cur.config, cur.dropped.clone());
        let mut warnings = Vec::new();
        match &action {
            Action::Drop { metric } => {
                if self.dataset.index_of(metric).is_none() {
                    return Err(SessionError::UnknownMetric(metric.clone()));
                }
                if dropped.contains(metric) {
                    return Err(SessionError::AlreadyDropped(metric.clone()));
                }
                dropped.push(metric.clone());
                let construct = &self.expected[metric];
                let remaining = self
                    .dataset
                    .columns
                    .iter()
                    .filter(|c| !dropped.contains(&c.raw) && &self.expected[&c.raw] == construct)
                    .count();
                if remaining < MIN_METRICS_PER_FACTOR {
                    warnings.push(format!(
                        "construct `{construct}` is left with {remaining} metric(s); at least {MIN_METRICS_PER_FACTOR} are needed"
                    ));
                }
            }
            Action::SetK { k: new_k } => k = *new_k,
            Action::SetThreshold { name, value } => config.thresholds.set(name, *value)?,
        }
        let state = evaluate(&self.dataset, &self.expected, k, config, dropped)?;
        self.history.push(RefinementStep {
            action,
            rationale,
            automatic,
            digest: state.digest.clone(),
            problems_after: state.problems.clone(),
            stop: state.stop.clone(),
            warnings,
        });
        self.snapshots.push(state);
        Ok(self.history.last().expect("just pushed"))
    }

    /// Removes exactly the last step.
    pub fn undo(&mut self) -> Result<RefinementStep, SessionError> {
        let step = self.history.pop().ok_or(SessionError::NothingToUndo)?;
        self.snapshots.pop();
        Ok(step)
    }

    /// Drops the top-ranked problem that is not marked retain, repeatedly,
    /// until the solution is clean or `max_steps` drops were made. A dropped
    /// metric is never re-added.
    pub fn auto_refine(&mut self, max_steps: usize) -> Result<AutoRefineOutcome, SessionError> {
        let mut steps = 0;
        let stopped_because = loop {
            let cur = self.current();
            if cur.stop.clean {
                break "solution is clean".to_string();
            }
            if steps >= max_steps {
                break format!("step limit {max_steps} reached");
            }
            let Some(worst) = cur.problems.iter().find(|p| !p.retain) else {
                break "no droppable problems remain".to_string();
            };
            let active = self.dataset.n_metrics() - cur.dropped.len();
            if active <= cur.k + 1 {
                break "too few metrics left to drop another".to_string();
            }
            let rationale = format!("auto: worst remaining problem, {}", worst.note);
            let metric = worst.metric.clone();
            self.apply_inner(Action::Drop { metric }, rationale, true)?;
            steps += 1;
        };
        Ok(AutoRefineOutcome { steps, clean: self.current().stop.clean, stopped_because })
    }

    /// Factor → metrics structure of the current solution, ready for CFA.
    pub fn export_model(&self) -> ConfirmatorySpec {
        let cur = self.current();
        let sol = &cur.solution;
        let structure: Vec<FactorSpec> = (0..sol.n_factors())
            .map(|f| FactorSpec {
                name: cur.factor_labels[f].clone().unwrap_or_else(|| format!("F{}", f + 1)),
                metrics: sol.metrics_on(f).into_iter().map(|m| m.raw.clone()).collect(),
            })
            .filter(|f| !f.metrics.is_empty())
            .collect();
        let content_validity = structure
            .iter()
            .map(|f| ChecklistItem {
                factor: f.name.clone(),
                prompt: format!(
                    "Do the remaining metrics of `{}` still cover every facet of the construct?",
                    f.name
                ),
                confirmed: false,
            })
            .collect();
        ConfirmatorySpec {
            structure,
            source: Some(EfaProvenance {
                k: cur.k,
                dropped: cur.dropped.clone(),
                digest: cur.digest.clone(),
                config: cur.config,
            }),
            content_validity,
            ..ConfirmatorySpec::default()
        }
    }

    pub fn to_document(&self) -> SessionDocument {
        let init = self.initial();
        SessionDocument {
            schema_version: SESSION_SCHEMA_VERSION,
            id: self.id.clone(),
            dataset: (*self.dataset).clone(),
            expected: self.expected.clone(),
            k: init.k,
            config: init.config,
            initial_digest: init.digest.clone(),
            steps: self
                .history
                .iter()
                .map(|s| RecordedStep {
                    action: s.action.clone(),
                    rationale: s.rationale.clone(),
                    automatic: s.automatic,
                    digest: s.digest.clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds a session by replaying its action log, checking every
    /// recorded digest.
    pub fn from_document(doc: &SessionDocument) -> Result<Self, SessionError> {
        if doc.schema_version != SESSION_SCHEMA_VERSION {
            return Err(SessionError::UnsupportedVersion(doc.schema_version));
        }
        let mut session = Self::new(Arc::new(doc.dataset.clone()), doc.expected.clone(), doc.k, doc.config)?
            .with_id(doc.id.clone());
        let check = |step: usize, recorded: &str, found: &str| {
            if recorded == found {
                Ok(())
            } else {
                Err(SessionError::DigestMismatch { step, recorded: recorded.into(), found: found.into() })
            }
        };
        check(0, &doc.initial_digest, &session.current().digest)?;
        for (i, step) in doc.steps.iter().enumerate() {
            let applied = session.apply_inner(step.action.clone(), step.rationale.clone(), step.automatic)?;
            let found = applied.digest.clone();
            check(i + 1, &step.digest, &found)?;
        }
        Ok(session)
    }

    /// Digests of the initial state and of every step.
    pub fn digests(&self) -> Vec<String> {
        self.snapshots.iter().map(|s| s.digest.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RecordedStep {
    #[serde(flatten)]
    pub action: Action,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub automatic: bool,
    pub digest: String,
}

/// Save format: inputs plus the action log; loading replays the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SessionDocument {
    pub schema_version: u32,
    pub id: String,
    pub dataset: MetricDataset,
    pub expected: BTreeMap<String, String>,
    pub k: usize,
    pub config: EfaConfig,
    pub initial_digest: String,
    pub steps: Vec<RecordedStep>,
}
