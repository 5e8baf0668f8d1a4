use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use passchain_core::chaincode::TravelRole;
use passchain_core::identity::SigningIdentity;
use passchain_core::time::Timestamp;
use rand::Rng;

use crate::error::GatewayError;
use crate::roles::Caller;

pub const TOKEN_BYTES: usize = 32;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

/// A logged-in user. The identity is a short-lived certificate issued by
/// the user's organization at login; proposals are signed with it.
#[derive(Debug)]
pub struct Session {
    pub token: String,
    pub subject_id: String,
    pub msp_id: String,
    pub role: TravelRole,
    pub expires_at: Timestamp,
    identity: SigningIdentity,
}

impl Session {
    pub fn new(
        subject_id: String,
        role: TravelRole,
        identity: SigningIdentity,
        expires_at: Timestamp,
    ) -> Self {
        Session {
            token: new_token(),
            subject_id,
            msp_id: identity.certificate().msp_id.clone(),
            role,
            expires_at,
            identity,
        }
    }

    pub fn caller(&self) -> Caller {
        Caller::from(&self.role)
    }

    pub fn identity(&self) -> &SigningIdentity {
        &self.identity
    }
}

/// Hex of 32 bytes from the thread-local CSPRNG.
pub fn new_token() -> String {
    let mut bytes = [0u8; TOKEN_BYTES];
    rand::rng().fill_bytes(&mut bytes);
    hex::encode(bytes)
}

#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            ttl,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// Stores `session`, dropping sessions that expired more than one TTL
    /// ago; more recent ones are kept so they can still be reported as
    /// expired.
    pub fn insert(&self, session: Session, now: Timestamp) -> Arc<Session> {
        let session = Arc::new(session);
        let mut map = self.sessions.lock().expect("session lock");
        map.retain(|_, s| s.expires_at.saturating_add(self.ttl) > now);
        map.insert(session.token.clone(), Arc::clone(&session));
        session
    }

    pub fn lookup(&self, token: &str, now: Timestamp) -> Result<Arc<Session>, GatewayError> {
        let mut map = self.sessions.lock().expect("session lock");
        let session = map.get(token).cloned().ok_or_else(GatewayError::unauthenticated)?;
        if now >= session.expires_at {
            map.remove(token);
            return Err(GatewayError::new("SESSION_EXPIRED", "log in again"));
        }
        Ok(session)
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().expect("session lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
