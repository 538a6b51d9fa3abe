//! Local JSON-over-HTTP API over the `metrology` toolkit.
//!
//! Every response is an [`ApiEnvelope`]: `{"ok": true, "result": …,
//! "error": null}` or `{"ok": false, "result": null, "error": {"code", …}}`.
//! Status codes: 404 for unknown ids, 409 when a session is busy with
//! another mutation, 422 for invalid input or a failed analysis, 413 for
//! oversized uploads.
//!
//! The server binds to loopback by default and has no authentication; it is
//! meant as a desk tool for one analyst.

pub mod api;
mod envelope;
mod routes;
mod schema;
mod state;

pub use envelope::{ApiEnvelope, ApiError, Failure, FieldError};
pub use routes::router;
pub use schema::schemas;
pub use state::{dataset_id, AppState, ServiceConfig, SessionHandle, DEFAULT_PORT, DEFAULT_UPLOAD_LIMIT};

/// Serves until the process is stopped.
pub async fn serve(state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(state.config.bind).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
