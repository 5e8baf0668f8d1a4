//! Web-facing gateway over an in-process network: logins and sessions,
//! the role table, proposal submission and a block explorer.

pub mod error;
pub mod http;
pub mod roles;
pub mod service;
pub mod session;

pub use error::GatewayError;
pub use roles::{permitted, Caller, CALLERS, ROLE_TABLE};
pub use service::{
    AgentForm, BlockSummary, DecisionForm, Gateway, GatewayConfig, LedgerStatus, LoginForm, LoginResponse, PassportForm,
    VisaForm, SESSION_TTL_ENV,
};
pub use session::{Session, SessionStore, DEFAULT_SESSION_TTL};
