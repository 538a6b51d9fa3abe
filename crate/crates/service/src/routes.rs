//! Handlers. Each one parses its body, calls the matching core operation and
//! wraps the result; no statistics happen here.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::Router;
use metrology::cfa::{self, ConfirmatorySpec, MeasurementModel};
use metrology::dataset::{correlation_matrix, CorrelationMatrix, MetricDataset, ParseOptions};
use metrology::efa::{self, expected_from_names, AdequacyReport, FactorCountAdvice, ScaleAudit};
use metrology::reliability::{self, RatingTable, ReliabilityReport};
use metrology::session::{Action, RefinementSession, SessionDocument};
use metrology::truescore::{self, ErrorModel};
use serde::de::DeserializeOwned;

use crate::api::*;
use crate::envelope::{ApiResult, FieldError, Failure, Ok200};
use crate::schema::schemas;
use crate::state::{AppState, SessionHandle};

pub fn router(state: AppState) -> Router {
    let limit = state.config.upload_limit;
    Router::new()
        .route("/datasets", post(upload_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/correlations", get(correlations))
        .route("/datasets/{id}/adequacy", get(adequacy))
        .route("/datasets/{id}/advice", post(advice))
        .route("/datasets/{id}/audit", post(audit))
        .route("/reliability", post(reliability_route))
        .route("/sessions", post(create_session))
        .route("/sessions/load", post(load_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(session_action))
        .route("/sessions/{id}/export", post(export_session))
        .route("/sessions/{id}/document", get(session_document))
        .route("/cfa/fit", post(fit))
        .route("/cfa/scores", post(scores))
        .route("/simulate", post(simulate))
        .route("/simulate/detectability", post(detectability))
        .route("/schema", get(schema))
        .fallback(|| async { Failure::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Parses a JSON body, reporting the failing field path. An empty body
/// reads as `{}`.
fn parse<T: DeserializeOwned>(body: Result<Bytes, BytesRejection>) -> Result<T, Failure> {
    let bytes = body.map_err(|e| {
        let status = e.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE { "payload_too_large" } else { "invalid_request" };
        Failure::new(status, code, e.body_text())
    })?;
    let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let message = e.into_inner().to_string();
        let mut f = Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message.clone());
        if field != "." {
            f.error.fields.push(FieldError { field, message });
        }
        f
    })
}

/// Runs CPU-bound core work off the async executor.
async fn blocking<T, F>(work: F) -> Result<T, Failure>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, Failure> + Send + 'static,
{
    tokio::task::spawn_blocking(work).await.map_err(|e| Failure::internal(format!("worker failed: {e}")))?
}

fn dataset(state: &AppState, id: &str) -> Result<Arc<MetricDataset>, Failure> {
    state.dataset(id).ok_or_else(|| Failure::not_found("dataset", id))
}

fn session(state: &AppState, id: &str) -> Result<SessionHandle, Failure> {
    state.session(id).ok_or_else(|| Failure::not_found("session", id))
}

async fn upload_dataset(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<DatasetSummary> {
    let req: DatasetUpload = parse(body)?;
    let delimiter = match req.delimiter {
        None => b',',
        Some(c) if c.is_ascii() => c as u8,
        Some(_) => return Err(Failure::invalid(Some("delimiter"), "delimiter must be a single ASCII character")),
    };
    let summary = blocking(move || {
        let mut ds = MetricDataset::load_str(&req.csv, ParseOptions { delimiter, strict: req.strict })?;
        for t in &req.reversed {
            ds = ds.invert_reversed(&[&t.metric], t.inversion)?;
        }
        let id = state.insert_dataset(ds);
        let ds = state.dataset(&id).expect("just inserted");
        Ok(DatasetSummary::of(&id, &ds))
    })
    .await?;
    Ok(Ok200(summary))
}

async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<DatasetSummary> {
    let ds = dataset(&state, &id)?;
    Ok(Ok200(DatasetSummary::of(&id, &ds)))
}

async fn correlations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<PolicyQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<CorrelationMatrix> {
    let Query(q) = query.map_err(|e| Failure::invalid(Some("policy"), e.body_text()))?;
    let ds = dataset(&state, &id)?;
    let r = blocking(move || Ok(correlation_matrix(&ds, q.policy)?)).await?;
    Ok(Ok200(r))
}

async fn adequacy(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<PolicyQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<AdequacyReport> {
    let Query(q) = query.map_err(|e| Failure::invalid(Some("policy"), e.body_text()))?;
    let ds = dataset(&state, &id)?;
    let report = blocking(move || {
        let r = correlation_matrix(&ds, q.policy)?;
        Ok(efa::adequacy(&r, r.n_used)?)
    })
    .await?;
    Ok(Ok200(report))
}

async fn advice(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<FactorCountAdvice> {
    let ds = dataset(&state, &id)?;
    let req: AdviceRequest = parse(body)?;
    let advice = blocking(move || Ok(efa::advise_factor_count(&ds, &req.parallel, req.theory)?)).await?;
    Ok(Ok200(advice))
}

async fn audit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<ScaleAudit> {
    let ds = dataset(&state, &id)?;
    let req: AuditRequest = parse(body)?;
    let audit = blocking(move || {
        let r = correlation_matrix(&ds, req.policy)?;
        let assignment = req.assignment.unwrap_or_else(|| expected_from_names(&ds.columns));
        Ok(efa::audit_scales(&r, &assignment)?)
    })
    .await?;
    Ok(Ok200(audit))
}

async fn reliability_route(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<ReliabilityReport> {
    let req: ReliabilityRequest = parse(body)?;
    let report = blocking(move || {
        Ok(match req {
            ReliabilityRequest::CronbachAlpha { items, labels } => reliability::cronbach_alpha_rows(&items, &labels)?,
            ReliabilityRequest::CronbachAlphaMetrics { dataset: id, metrics } => {
                let ds = dataset(&state, &id)?;
                reliability::cronbach_alpha_for(&ds, &metrics)?
            }
            ReliabilityRequest::PercentAgreement { ratings } => {
                reliability::percent_agreement(&RatingTable::new(ratings, Default::default())?)?
            }
            ReliabilityRequest::KrippendorffAlpha { ratings, level } => {
                reliability::krippendorff_alpha(&RatingTable::new(ratings, level)?)?
            }
            ReliabilityRequest::CompositeReliability { loadings, uniquenesses } => {
                reliability::composite_reliability(&loadings, &uniquenesses)?
            }
            ReliabilityRequest::OmegaTotal { loadings, uniquenesses } => {
                reliability::omega_total(&loadings, &uniquenesses)?
            }
        })
    })
    .await?;
    Ok(Ok200(report))
}

async fn create_session(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<SessionView> {
    let req: CreateSession = parse(body)?;
    let ds = dataset(&state, &req.dataset)?;
    let view = blocking(move || {
        let expected = req.expected.unwrap_or_else(|| expected_from_names(&ds.columns));
        let session = RefinementSession::new(ds, expected, req.k, req.config)?;
        let (_, handle) = state.insert_session(session);
        let guard = handle.try_lock().map_err(|_| Failure::conflict("session is busy"))?;
        Ok(SessionView::of(&guard))
    })
    .await?;
    Ok(Ok200(view))
}

async fn load_session(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<SessionView> {
    let doc: SessionDocument = parse(body)?;
    let view = blocking(move || {
        let session = RefinementSession::from_document(&doc)?;
        let ds = session.dataset().clone();
        state.insert_dataset(ds);
        let (_, handle) = state.insert_session(session);
        let guard = handle.try_lock().map_err(|_| Failure::conflict("session is busy"))?;
        Ok(SessionView::of(&guard))
    })
    .await?;
    Ok(Ok200(view))
}

/// Reads take the lock too, so they never observe a half-applied step; a
/// busy session answers 409 rather than queueing.
async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let handle = session(&state, &id)?;
    let guard = handle.try_lock().map_err(|_| Failure::conflict(format!("session `{id}` is being modified")))?;
    Ok(Ok200(SessionView::of(&guard)))
}

async fn session_document(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionDocument> {
    let handle = session(&state, &id)?;
    let guard = handle.try_lock().map_err(|_| Failure::conflict(format!("session `{id}` is being modified")))?;
    Ok(Ok200(guard.to_document()))
}

async fn session_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<SessionView> {
    let handle = session(&state, &id)?;
    let req: ActionRequest = parse(body)?;
    let mut guard = handle
        .try_lock_owned()
        .map_err(|_| Failure::conflict(format!("session `{id}` is being modified by another request")))?;
    let view = blocking(move || {
        let s = &mut *guard;
        let mut auto = None;
        match req {
            ActionRequest::Drop { metric, rationale } => {
                s.apply(Action::Drop { metric }, rationale)?;
            }
            ActionRequest::Undo => {
                s.undo()?;
            }
            ActionRequest::SetK { k, rationale } => {
                s.apply(Action::SetK { k }, rationale)?;
            }
            ActionRequest::SetThreshold { name, value, rationale } => {
                s.apply(Action::SetThreshold { name, value }, rationale)?;
            }
            ActionRequest::AutoRefine { max_steps } => {
                auto = Some(s.auto_refine(max_steps)?);
            }
        }
        state.persist(s);
        let mut view = SessionView::of(s);
        view.auto_refine = auto;
        Ok(view)
    })
    .await?;
    Ok(Ok200(view))
}

async fn export_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<ConfirmatorySpec> {
    let handle = session(&state, &id)?;
    let guard = handle.try_lock().map_err(|_| Failure::conflict(format!("session `{id}` is being modified")))?;
    Ok(Ok200(guard.export_model()))
}

async fn fit(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<MeasurementModel> {
    let req: FitRequest = parse(body)?;
    let ds = dataset(&state, &req.dataset)?;
    let model = blocking(move || Ok(cfa::fit(&ds, &req.spec, &req.options)?)).await?;
    Ok(Ok200(model))
}

async fn scores(State(state): State<AppState>, body: Result<Bytes, BytesRejection>) -> ApiResult<ScoresResult> {
    let req: ScoresRequest = parse(body)?;
    let ds = dataset(&state, &req.dataset)?;
    // Same checks as a document import.
    let model = cfa::import_formulas(&serde_json::to_string(&req.model).map_err(|e| Failure::internal(e.to_string()))?)?;
    let result = blocking(move || {
        Ok(ScoresResult {
            entity_ids: ds.entity_ids.clone(),
            factors: model.factors.clone(),
            scores: cfa::factor_scores(&model, &ds)?,
        })
    })
    .await?;
    Ok(Ok200(result))
}

async fn simulate(body: Result<Bytes, BytesRejection>) -> ApiResult<SimulateResult> {
    let req: SimulateRequest = parse(body)?;
    if req.n > MAX_SIMULATION_SIZE {
        return Err(Failure::invalid(Some("n"), format!("at most {MAX_SIMULATION_SIZE} observations per request")));
    }
    let result = blocking(move || {
        let model = ErrorModel::new(req.true_score, req.random_sd, req.systematic_offset, req.seed);
        let samples = truescore::simulate_observations(&model, req.n)?;
        Ok(SimulateResult {
            summary: truescore::summarize(&samples)?,
            histogram: truescore::histogram(&samples, req.bins)?,
            samples: req.include_samples.then_some(samples),
        })
    })
    .await?;
    Ok(Ok200(result))
}

async fn detectability(body: Result<Bytes, BytesRejection>) -> ApiResult<DetectabilityResult> {
    let req: DetectabilityRequest = parse(body)?;
    let report = truescore::detectability(req.effect, req.per_obs_sd)?;
    let sample_size = match (req.alpha, req.power) {
        (Some(alpha), Some(power)) => Some(truescore::required_sample_size(req.effect, req.per_obs_sd, alpha, power)?),
        (None, None) => None,
        _ => return Err(Failure::invalid(Some("power"), "give both alpha and power for a sample-size plan")),
    };
    Ok(Ok200(DetectabilityResult { detectability: report, sample_size }))
}

async fn schema() -> ApiResult<serde_json::Value> {
    Ok(Ok200(schemas()))
}
