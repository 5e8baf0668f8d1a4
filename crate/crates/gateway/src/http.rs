//! The HTTP surface consumed by the portal. Bodies are JSON; errors are
//! `{code, message, retryable}`.

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::header::AUTHORIZATION;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use passchain_core::network::TxReceipt;
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::service::{AgentForm, DecisionForm, Gateway, LoginForm, PassportForm, VisaForm};
use crate::session::Session;

pub const GATEWAY_PORT_ENV: &str = "GATEWAY_PORT";

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type Shared = State<Arc<Gateway>>;

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/api/login", post(login))
        .route("/api/citizen/passport-applications", post(apply_passport))
        .route("/api/citizen/documents", get(documents))
        .route("/api/citizen/visa-applications", post(apply_visa))
        .route("/api/agent/passport/pending", get(pending_passports))
        .route("/api/agent/passport/{id}/decision", post(decide_passport))
        .route("/api/agent/visa/pending", get(pending_visas))
        .route("/api/agent/visa/{id}/verify", post(verify_visa))
        .route("/api/agent/visa/{id}/decision", post(decide_visa))
        .route("/api/admin/agents", post(register_agent))
        .route("/api/admin/blocks", get(blocks))
        .route("/api/admin/state", get(ledger_status))
        .fallback(|| async { GatewayError::new("NOT_FOUND", "no such endpoint") })
        .with_state(gateway)
}

/// Serves `router` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    gateway: Arc<Gateway>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await
}

fn bearer(headers: &HeaderMap) -> Result<&str, GatewayError> {
    headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(GatewayError::unauthenticated)
}

fn body<T>(json: Result<Json<T>, JsonRejection>) -> Result<T, GatewayError> {
    json.map(|Json(t)| t).map_err(|e| GatewayError::bad_request(e.body_text()))
}

/// Runs blocking gateway work off the async executor.
async fn blocking<T, F>(gateway: Arc<Gateway>, f: F) -> Result<T, GatewayError>
where
    T: Send + 'static,
    F: FnOnce(&Gateway) -> Result<T, GatewayError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&gateway))
        .await
        .map_err(|e| GatewayError::new("INTERNAL", e.to_string()))?
}

/// Like [`blocking`], after resolving the bearer token.
async fn authed<T, F>(gateway: Arc<Gateway>, headers: &HeaderMap, f: F) -> Result<T, GatewayError>
where
    T: Send + 'static,
    F: FnOnce(&Gateway, &Session) -> Result<T, GatewayError> + Send + 'static,
{
    let token = bearer(headers)?.to_owned();
    blocking(gateway, move |g| {
        let session = g.session(&token)?;
        f(g, &session)
    })
    .await
}

fn json<T: Serialize>(result: Result<T, GatewayError>) -> Response {
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => e.into_response(),
    }
}

/// 200 for a committed transaction, 202 while it is still pending.
fn receipt(result: Result<TxReceipt, GatewayError>) -> Response {
    match result {
        Ok(r) if r.is_valid() => Json(r).into_response(),
        Ok(r) => (StatusCode::ACCEPTED, Json(r)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn login(State(g): Shared, form: Result<Json<LoginForm>, JsonRejection>) -> Response {
    let form = match body(form) {
        Ok(f) => f,
        Err(e) => return e.into_response(),
    };
    json(blocking(g, move |g| g.login(&form)).await)
}

async fn apply_passport(State(g): Shared, form: Result<Json<PassportForm>, JsonRejection>) -> Response {
    let form = match body(form) {
        Ok(f) => f,
        Err(e) => return e.into_response(),
    };
    receipt(blocking(g, move |g| g.apply_passport(&form)).await)
}

async fn documents(State(g): Shared, headers: HeaderMap) -> Response {
    json(authed(g, &headers, |g, s| g.documents(s)).await)
}

async fn apply_visa(State(g): Shared, headers: HeaderMap, form: Result<Json<VisaForm>, JsonRejection>) -> Response {
    let form = match body(form) {
        Ok(f) => f,
        Err(e) => return e.into_response(),
    };
    receipt(authed(g, &headers, move |g, s| g.apply_visa(s, &form)).await)
}

async fn pending_passports(State(g): Shared, headers: HeaderMap) -> Response {
    json(authed(g, &headers, |g, s| g.pending_passports(s)).await)
}

async fn decide_passport(
    State(g): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    form: Result<Json<DecisionForm>, JsonRejection>,
) -> Response {
    let form = match body(form) {
        Ok(f) => f,
        Err(e) => return e.into_response(),
    };
    receipt(authed(g, &headers, move |g, s| g.decide_passport(s, &id, &form.decision)).await)
}

async fn pending_visas(State(g): Shared, headers: HeaderMap) -> Response {
    json(authed(g, &headers, |g, s| g.pending_visas(s)).await)
}

async fn verify_visa(State(g): Shared, headers: HeaderMap, Path(id): Path<String>) -> Response {
    receipt(authed(g, &headers, move |g, s| g.verify_visa(s, &id)).await)
}

async fn decide_visa(
    State(g): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    form: Result<Json<DecisionForm>, JsonRejection>,
) -> Response {
    let form = match body(form) {
        Ok(f) => f,
        Err(e) => return e.into_response(),
    };
    receipt(authed(g, &headers, move |g, s| g.decide_visa(s, &id, &form.decision)).await)
}

async fn register_agent(State(g): Shared, headers: HeaderMap, form: Result<Json<AgentForm>, JsonRejection>) -> Response {
    let form = match body(form) {
        Ok(f) => f,
        Err(e) => return e.into_response(),
    };
    receipt(authed(g, &headers, move |g, s| g.register_agent(s, &form)).await)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockRange {
    from: Option<u64>,
    to: Option<u64>,
}

async fn blocks(State(g): Shared, headers: HeaderMap, range: Result<Query<BlockRange>, QueryRejection>) -> Response {
    let range = match range {
        Ok(Query(r)) => r,
        Err(e) => return GatewayError::bad_request(e.body_text()).into_response(),
    };
    json(authed(g, &headers, move |g, s| g.explore_blocks(s, range.from, range.to)).await)
}

async fn ledger_status(State(g): Shared, headers: HeaderMap) -> Response {
    json(authed(g, &headers, |g, s| g.ledger_status(s)).await)
}
