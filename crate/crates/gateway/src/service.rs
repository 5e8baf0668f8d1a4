//! Translation of portal requests into proposals and queries.

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use passchain_core::chaincode::{password_digest, PassportApplicationRequest, TravelRole, SALT_LEN};
use passchain_core::codec;
use passchain_core::digest::{compute_digest, Digest};
use passchain_core::identity::{Role, SigningIdentity};
use passchain_core::ledger::{Ledger, ValidationCode};
use passchain_core::network::{Deployment, Network, TxReceipt, PENDING_TIMEOUT, RECEIPT_TIMEOUT};
use passchain_core::time::Timestamp;
use rand::rngs::ChaCha20Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::GatewayError;
use crate::roles::{permitted, Caller};
use crate::session::{Session, SessionStore, DEFAULT_SESSION_TTL};

pub const SESSION_TTL_ENV: &str = "SESSION_TTL_SECONDS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewayConfig {
    pub session_ttl: Duration,
    pub receipt_timeout: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            session_ttl: DEFAULT_SESSION_TTL,
            receipt_timeout: RECEIPT_TIMEOUT,
        }
    }
}

impl GatewayConfig {
    /// Defaults, with the session TTL overridden by `SESSION_TTL_SECONDS`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let mut config = GatewayConfig::default();
        if let Ok(text) = std::env::var(SESSION_TTL_ENV) {
            let secs: u64 = text
                .parse()
                .ok()
                .filter(|s| *s > 0)
                .ok_or_else(|| GatewayError::bad_request(format!("{SESSION_TTL_ENV}={text:?}")))?;
            config.session_ttl = Duration::from_secs(secs);
        }
        Ok(config)
    }
}

#[derive(Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoginForm {
    pub subject_id: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoginResponse {
    pub token: String,
    pub subject_id: String,
    pub role: TravelRole,
    pub msp_id: String,
    pub expires_at: Timestamp,
}

#[derive(Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PassportForm {
    pub user_id: String,
    pub name: String,
    pub email: String,
    pub phone_number: u64,
    pub address: String,
    pub aadhaar_number: u64,
    pub password: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VisaForm {
    pub passport_id: String,
    pub country: String,
    pub visa_type: String,
    pub duration_days: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionForm {
    pub decision: String,
}

#[derive(Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentForm {
    pub subject_id: String,
    pub role: String,
    pub msp_id: String,
    pub password: String,
}

macro_rules! redacted_debug {
    ($ty:ident { $($field:ident),* }) => {
        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_struct(stringify!($ty))
                    $(.field(stringify!($field), &self.$field))*
                    .field("password", &"<redacted>")
                    .finish()
            }
        }
    };
}

redacted_debug!(LoginForm { subject_id });
redacted_debug!(PassportForm { user_id, name, email, phone_number, address, aadhaar_number });
redacted_debug!(AgentForm { subject_id, role, msp_id });

/// Block explorer row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BlockSummary {
    pub number: u64,
    pub prev_hash: Digest,
    pub data_hash: Digest,
    pub header_hash: Digest,
    pub tx_count: usize,
    pub tx_ids: Vec<String>,
    pub validation_flags: Vec<ValidationCode>,
}

/// Height and state fingerprint of one ledger copy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerStatus {
    pub name: String,
    pub height: u64,
    pub last_header_hash: Option<Digest>,
    pub state_digest: Digest,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Authenticated {
    msp_id: String,
    role: TravelRole,
    subject_id: String,
}

pub struct Gateway {
    deployment: Deployment,
    config: GatewayConfig,
    sessions: SessionStore,
    /// Salts and session keys end up on the chain, so they come from an
    /// injectable generator. Tokens do not and use the OS-seeded one.
    rng: Mutex<ChaCha20Rng>,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("network", &self.deployment.network)
            .field("config", &self.config)
            .field("sessions", &self.sessions.len())
            .finish()
    }
}

impl Gateway {
    pub fn new(deployment: Deployment, config: GatewayConfig, rng: ChaCha20Rng) -> Self {
        Gateway {
            sessions: SessionStore::new(config.session_ttl),
            deployment,
            config,
            rng: Mutex::new(rng),
        }
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.deployment.network
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn session(&self, token: &str) -> Result<Arc<Session>, GatewayError> {
        self.sessions.lookup(token, self.network().now())
    }

    pub fn login(&self, form: &LoginForm) -> Result<LoginResponse, GatewayError> {
        let value = self.query(
            None,
            "authenticate",
            vec![form.subject_id.clone(), form.password.clone()],
        )?;
        let auth: Authenticated = serde_json::from_value(value)
            .map_err(|e| GatewayError::new("INTERNAL", format!("authenticate response: {e}")))?;
        let ca = self
            .deployment
            .authority(&auth.msp_id)
            .ok_or_else(|| GatewayError::new("INTERNAL", format!("no authority for {}", auth.msp_id)))?;
        let now = self.network().now();
        let expires_at = now.saturating_add(self.config.session_ttl);
        let cert_role = match auth.role {
            TravelRole::ChannelAdmin => Role::Admin,
            _ => Role::Member,
        };
        let identity = {
            let mut rng = self.rng.lock().expect("rng lock");
            ca.enroll(&auth.subject_id, cert_role, &mut *rng, expires_at)
        };
        let session = self.sessions.insert(
            Session::new(auth.subject_id, auth.role, identity, expires_at),
            now,
        );
        tracing::info!(subject = %session.subject_id, role = %session.role, "login");
        Ok(LoginResponse {
            token: session.token.clone(),
            subject_id: session.subject_id.clone(),
            role: session.role.clone(),
            msp_id: session.msp_id.clone(),
            expires_at,
        })
    }

    /// The signing identity, the peer to query and the endorsing peers.
    fn route<'a>(&'a self, session: Option<&'a Session>) -> (&'a SigningIdentity, String, Vec<String>) {
        let orderer_msp = self.deployment.manifest.orderer_msp().to_owned();
        let (identity, home) = match session {
            Some(s) => (s.identity(), s.msp_id.clone()),
            None => (&self.deployment.gateway, self.deployment.manifest.passport_msp().to_owned()),
        };
        let mut endorsers = vec![home.clone()];
        if home != orderer_msp {
            endorsers.push(orderer_msp);
        }
        (identity, home, endorsers)
    }

    fn check(&self, session: Option<&Session>, function: &str) -> Result<(), GatewayError> {
        let caller = session.map_or(Caller::Anonymous, Session::caller);
        if permitted(caller, function) {
            Ok(())
        } else {
            Err(GatewayError::forbidden_function(&caller.to_string(), function))
        }
    }

    /// Endorses, orders and waits for commit. A receipt is returned for
    /// VALID and PENDING_TIMEOUT; any other flag becomes an error.
    pub fn invoke(
        &self,
        session: Option<&Session>,
        function: &str,
        args: Vec<String>,
    ) -> Result<TxReceipt, GatewayError> {
        self.check(session, function)?;
        let (identity, _, endorsers) = self.route(session);
        let proposal = self.network().proposal(identity, function, args);
        let endorsers: Vec<&str> = endorsers.iter().map(String::as_str).collect();
        let receipt = self
            .network()
            .submit(&proposal, &endorsers, self.config.receipt_timeout)?;
        tracing::info!(function, tx_id = %receipt.tx_id, validity = %receipt.validity, "invoke");
        if receipt.is_valid() || receipt.validity == PENDING_TIMEOUT {
            Ok(receipt)
        } else {
            Err(GatewayError::new(
                &receipt.validity,
                format!("transaction {} committed as {}", receipt.tx_id, receipt.validity),
            ))
        }
    }

    /// Runs `function` in query mode on the caller's own peer.
    pub fn query(&self, session: Option<&Session>, function: &str, args: Vec<String>) -> Result<Value, GatewayError> {
        self.check(session, function)?;
        let (identity, home, _) = self.route(session);
        let proposal = self.network().proposal(identity, function, args);
        let bytes = self.network().query(&home, &proposal)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| GatewayError::new("INTERNAL", format!("{function} response: {e}")))
    }

    /// Salts the password here so it never leaves the gateway.
    pub fn apply_passport(&self, form: &PassportForm) -> Result<TxReceipt, GatewayError> {
        let salt = self.salt();
        let request = PassportApplicationRequest {
            user_id: form.user_id.clone(),
            name: form.name.clone(),
            email: form.email.clone(),
            phone_number: form.phone_number,
            address: form.address.clone(),
            aadhaar_number: form.aadhaar_number,
            password_digest: password_digest(&salt, &form.password),
            salt: salt.to_vec(),
        };
        let arg = codec::canonical_encode(&request).map_err(|e| GatewayError::bad_request(e.to_string()))?;
        self.invoke(None, "applyPassport", vec![String::from_utf8(arg).expect("canonical text")])
    }

    pub fn documents(&self, session: &Session) -> Result<Value, GatewayError> {
        self.query(Some(session), "getDocuments", vec![session.subject_id.clone()])
    }

    pub fn apply_visa(&self, session: &Session, form: &VisaForm) -> Result<TxReceipt, GatewayError> {
        self.invoke(
            Some(session),
            "applyVisa",
            vec![
                form.passport_id.clone(),
                form.country.clone(),
                form.visa_type.clone(),
                form.duration_days.to_string(),
            ],
        )
    }

    pub fn pending_passports(&self, session: &Session) -> Result<Value, GatewayError> {
        self.query(Some(session), "listPending", vec!["PASSPORT".into()])
    }

    pub fn decide_passport(&self, session: &Session, user_id: &str, decision: &str) -> Result<TxReceipt, GatewayError> {
        self.invoke(Some(session), "reviewPassport", vec![user_id.into(), decision.into()])
    }

    /// Pending visa applications for the agent's own country.
    pub fn pending_visas(&self, session: &Session) -> Result<Value, GatewayError> {
        let TravelRole::VisaAgent(country) = &session.role else {
            return Err(GatewayError::forbidden_function(&session.caller().to_string(), "listPending"));
        };
        self.query(Some(session), "listPending", vec!["VISA".into(), country.clone()])
    }

    pub fn verify_visa(&self, session: &Session, application_id: &str) -> Result<TxReceipt, GatewayError> {
        self.invoke(Some(session), "verifyVisa", vec![application_id.into()])
    }

    pub fn decide_visa(&self, session: &Session, application_id: &str, decision: &str) -> Result<TxReceipt, GatewayError> {
        self.invoke(Some(session), "reviewVisa", vec![application_id.into(), decision.into()])
    }

    pub fn register_agent(&self, session: &Session, form: &AgentForm) -> Result<TxReceipt, GatewayError> {
        let salt = self.salt();
        let digest = password_digest(&salt, &form.password);
        self.invoke(
            Some(session),
            "registerAgent",
            vec![
                form.subject_id.clone(),
                form.role.clone(),
                form.msp_id.clone(),
                hex::encode(salt),
                digest.to_hex(),
            ],
        )
    }

    /// Summaries of blocks `from..=to` from the orderer organization's
    /// peer. Both ends default to the whole chain.
    pub fn explore_blocks(
        &self,
        session: &Session,
        from: Option<u64>,
        to: Option<u64>,
    ) -> Result<Vec<BlockSummary>, GatewayError> {
        if session.caller() != Caller::ChannelAdmin {
            return Err(GatewayError::forbidden_function(&session.caller().to_string(), "explore_blocks"));
        }
        let msp = self.deployment.manifest.orderer_msp().to_owned();
        let summaries = self.network().with_peer(&msp, |peer| {
            let blocks = peer.ledger().chain().blocks();
            let height = blocks.len() as u64;
            let from = from.unwrap_or(0);
            let to = to.unwrap_or(height.saturating_sub(1));
            if from > to || to >= height {
                return Err(GatewayError::new(
                    "OUT_OF_RANGE",
                    format!("blocks {from}..={to} requested, height is {height}"),
                ));
            }
            Ok(blocks[from as usize..=to as usize].iter().map(summarize).collect())
        })?;
        summaries
    }

    /// Live status of the orderer's ledger and every peer's.
    pub fn ledger_status(&self, session: &Session) -> Result<Vec<LedgerStatus>, GatewayError> {
        if session.caller() != Caller::ChannelAdmin {
            return Err(GatewayError::forbidden_function(&session.caller().to_string(), "ledger_status"));
        }
        let status = |name: String, ledger: &Ledger| LedgerStatus {
            name,
            height: ledger.height(),
            last_header_hash: ledger.chain().last_header().map(|h| h.digest()),
            state_digest: compute_digest(&ledger.state().canonical_bytes()),
        };
        let net = self.network();
        let mut out = vec![net.with_orderer(|o| status("orderer".into(), o.ledger()))];
        for msp in net.peer_msps() {
            out.push(net.with_peer(&msp, |p| status(msp.clone(), p.ledger()))?);
        }
        Ok(out)
    }

    fn salt(&self) -> [u8; SALT_LEN] {
        let mut salt = [0u8; SALT_LEN];
        self.rng.lock().expect("rng lock").fill_bytes(&mut salt);
        salt
    }
}

pub fn summarize(block: &passchain_core::ledger::Block) -> BlockSummary {
    BlockSummary {
        number: block.header.number,
        prev_hash: block.header.prev_hash,
        data_hash: block.header.data_hash,
        header_hash: block.header.digest(),
        tx_count: block.data.len(),
        tx_ids: block.data.iter().map(|t| t.payload.tx_id.clone()).collect(),
        validation_flags: block.metadata.validation_flags.clone(),
    }
}
