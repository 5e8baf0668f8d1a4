//! Channel configuration, stored in the genesis block under [`CONFIG_KEY`].

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::digest::HashAlgorithm;
use crate::identity::{self, verify_certificate, Certificate, MspConfig, SignaturePolicy};
use crate::time::Timestamp;

/// World-state key holding the canonical-encoded [`ChannelConfig`].
pub const CONFIG_KEY: &str = "CONFIG";

pub const DEFAULT_BATCH_MAX_COUNT: u32 = 10;
pub const DEFAULT_BATCH_TIMEOUT: Duration = Duration::from_secs(2);
/// Pending transactions the orderer holds before answering `BUSY`.
pub const DEFAULT_MAX_PENDING: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub channel_id: String,
    pub hash_function: HashAlgorithm,
    pub signature_scheme: String,
    pub msps: Vec<MspConfig>,
    pub readers_policy: SignaturePolicy,
    pub writers_policy: SignaturePolicy,
    pub admins_policy: SignaturePolicy,
    pub batch_max_count: u32,
    pub batch_timeout_ms: u64,
    pub max_pending: u32,
    pub orderer_certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("CONFIG_INVALID: {0}")]
pub struct ConfigError(pub String);

impl ChannelConfig {
    pub fn batch_timeout(&self) -> Duration {
        Duration::from_millis(self.batch_timeout_ms)
    }

    pub fn msp(&self, msp_id: &str) -> Option<&MspConfig> {
        self.msps.iter().find(|m| m.msp_id == msp_id)
    }

    /// Verifies `cert` against the channel MSP it names.
    pub fn verify_member(&self, cert: &Certificate, now: Timestamp) -> bool {
        self.msp(&cert.msp_id)
            .is_some_and(|msp| verify_certificate(cert, msp, now))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.channel_id.is_empty() {
            return Err(ConfigError("channel_id is empty".into()));
        }
        if self.batch_max_count < 1 {
            return Err(ConfigError("batch_max_count must be at least 1".into()));
        }
        if self.batch_timeout_ms == 0 {
            return Err(ConfigError("batch_timeout must be positive".into()));
        }
        if self.signature_scheme != identity::SIGNATURE_SCHEME {
            return Err(ConfigError(format!(
                "unsupported signature scheme {}",
                self.signature_scheme
            )));
        }
        for (i, msp) in self.msps.iter().enumerate() {
            if self.msps[..i].iter().any(|m| m.msp_id == msp.msp_id) {
                return Err(ConfigError(format!("duplicate msp_id {}", msp.msp_id)));
            }
        }
        for (name, policy) in [
            ("readers", &self.readers_policy),
            ("writers", &self.writers_policy),
            ("admins", &self.admins_policy),
        ] {
            if let Some(unknown) = policy.msp_ids().into_iter().find(|m| self.msp(m).is_none()) {
                return Err(ConfigError(format!(
                    "{name} policy references unknown msp {unknown}"
                )));
            }
        }
        Ok(())
    }
}
