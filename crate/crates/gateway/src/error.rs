use serde::Serialize;

use passchain_core::network::NetworkError;

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct GatewayError {
    pub code: String,
    pub message: String,
    pub retryable: bool,
}

impl GatewayError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        GatewayError {
            code: code.into(),
            message: message.into(),
            retryable: matches!(code, "LEDGER_UNAVAILABLE" | "BUSY" | "MVCC_CONFLICT"),
        }
    }

    pub fn unauthenticated() -> Self {
        GatewayError::new("UNAUTHENTICATED", "a bearer token is required")
    }

    pub fn forbidden_function(caller: &str, function: &str) -> Self {
        GatewayError::new("FORBIDDEN_FUNCTION", format!("{caller} may not call {function}"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        GatewayError::new("BAD_REQUEST", message)
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.code.as_str() {
            "UNAUTHENTICATED" | "SESSION_EXPIRED" | "DENIED" => 401,
            "FORBIDDEN_FUNCTION" | "FORBIDDEN" | "POLICY_DENIED" | "BAD_CALLER_CERT" => 403,
            "NOT_FOUND" | "OUT_OF_RANGE" | "NO_PASSPORT" => 404,
            "BAD_REQUEST" | "BAD_ARGUMENTS" | "VALIDATION" | "QUERY_WROTE" | "UNKNOWN_FUNCTION" => 400,
            "DUPLICATE_APPLICATION" | "DUPLICATE_SUBJECT" | "DUPLICATE_PENDING" | "ALREADY_HAS_PASSPORT"
            | "NOT_VERIFIED" | "MVCC_CONFLICT" | "DUPLICATE_TXID" => 409,
            "LEDGER_UNAVAILABLE" | "BUSY" => 503,
            _ => 500,
        }
    }
}

impl From<NetworkError> for GatewayError {
    fn from(e: NetworkError) -> Self {
        let text = e.to_string();
        // most errors already render as "CODE: detail"
        let message = text
            .strip_prefix(e.code())
            .and_then(|rest| rest.strip_prefix(": "))
            .unwrap_or(&text);
        let mut out = GatewayError::new(e.code(), message);
        out.retryable = e.retryable();
        out
    }
}
