//! HTTP consultation API: resumable sessions, question/answer exchange,
//! traces, snapshots, knowledge browsing and metering.

pub mod json;
mod sessions;

pub use sessions::{Config, Metrics, Service, SessionState};

use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

/// Routes under `/api`.
pub fn router(service: Service) -> Router {
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE]);
    let cors = match service.config().cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => cors.allow_origin(AllowOrigin::exact(origin)),
        _ => cors.allow_origin(Any),
    };
    Router::new()
        .route("/api/sessions", post(sessions::create))
        .route("/api/sessions/{id}", get(sessions::show).delete(sessions::remove))
        .route("/api/sessions/{id}/answers", post(sessions::answer))
        .route("/api/sessions/{id}/trace", get(sessions::trace))
        .route("/api/sessions/{id}/snapshot", get(sessions::snapshot))
        .route("/api/kb", get(sessions::kb))
        .route("/api/metrics", get(sessions::metrics))
        .layer(cors)
        .with_state(service)
}

/// Serves the API on `listener` until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, service: Service) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}
