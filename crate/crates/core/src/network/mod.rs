//! Assembly of an orderer and peers into one in-process network, plus
//! bootstrap and loading of a network persisted under a data directory.

mod deploy;
mod topology;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chaincode::TRAVEL_CHAINCODE;
use crate::channel::ChannelConfig;
use crate::identity::{Certificate, IdentityError, SigningIdentity};
use crate::ledger::{LedgerError, ValidationCode};
use crate::ordering::{Orderer, OrderingError, RejectReason};
use crate::peer::{Endorsed, Peer, PeerError, Proposal};
use crate::time::{Clock, Timestamp};

pub use deploy::{
    bootstrap, bootstrap_in_memory, ledger_dirs, load, read_manifest, Deployment, NetworkManifest, OrgEntry, OrgKind,
    ORDERER_DIR,
};
pub use topology::{AccountSpec, BatchSpec, OrdererOrg, PassportOffice, Topology, VisaOffice};

/// Default wait for a submitted transaction to commit.
pub const RECEIPT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("{0}")]
    Rejected(RejectReason),
    #[error("{0}")]
    Peer(#[from] PeerError),
    #[error("{0}")]
    Ordering(#[from] OrderingError),
    #[error("{0}")]
    Ledger(#[from] LedgerError),
    #[error("LEDGER_UNAVAILABLE: the ordering service is offline")]
    Unavailable,
    #[error("ENDORSEMENT_MISMATCH: peers produced different results")]
    EndorsementMismatch,
    #[error("UNKNOWN_ORG: no peer for {0}")]
    UnknownOrg(String),
    #[error("TOPOLOGY_INVALID: {0}")]
    Topology(String),
    #[error("DIR_NOT_EMPTY: {}", .0.display())]
    DirNotEmpty(PathBuf),
    #[error("NOT_BOOTSTRAPPED: {0}")]
    NotBootstrapped(String),
    #[error("BOOTSTRAP_FAILED: {0}")]
    Bootstrap(String),
    #[error("identity: {0}")]
    Identity(#[from] IdentityError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl NetworkError {
    pub fn code(&self) -> &'static str {
        match self {
            NetworkError::Rejected(r) => r.code(),
            NetworkError::Peer(e) => e.code(),
            NetworkError::Ordering(e) => e.code(),
            NetworkError::Ledger(e) => e.code(),
            NetworkError::Unavailable => "LEDGER_UNAVAILABLE",
            NetworkError::EndorsementMismatch => "ENDORSEMENT_MISMATCH",
            NetworkError::UnknownOrg(_) => "UNKNOWN_ORG",
            NetworkError::Topology(_) => "TOPOLOGY_INVALID",
            NetworkError::DirNotEmpty(_) => "DIR_NOT_EMPTY",
            NetworkError::NotBootstrapped(_) => "NOT_BOOTSTRAPPED",
            NetworkError::Bootstrap(_) => "BOOTSTRAP_FAILED",
            NetworkError::Identity(_) => "IDENTITY",
            NetworkError::Io(_) => "IO",
        }
    }

    /// Whether the same request may succeed if retried later.
    pub fn retryable(&self) -> bool {
        matches!(
            self,
            NetworkError::Unavailable | NetworkError::Rejected(RejectReason::Busy)
        )
    }
}

impl From<RejectReason> for NetworkError {
    fn from(r: RejectReason) -> Self {
        NetworkError::Rejected(r)
    }
}

/// Outcome of a submitted transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TxReceipt {
    pub tx_id: String,
    /// Absent when the wait timed out.
    pub block_number: Option<u64>,
    /// A validation code, or `PENDING_TIMEOUT`.
    pub validity: String,
    /// Decoded chaincode response from endorsement.
    pub response: serde_json::Value,
}

impl TxReceipt {
    pub fn is_valid(&self) -> bool {
        self.validity == ValidationCode::Valid.as_str()
    }
}

pub const PENDING_TIMEOUT: &str = "PENDING_TIMEOUT";

/// One orderer and one peer per organization, sharing a clock.
pub struct Network {
    channel_id: String,
    orderer: Mutex<Orderer>,
    /// Certificate the network presents when pulling blocks for its peers.
    delivery: Certificate,
    peers: BTreeMap<String, RwLock<Peer>>,
    clock: Arc<dyn Clock>,
    online: AtomicBool,
}

impl std::fmt::Debug for Network {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network")
            .field("channel_id", &self.channel_id)
            .field("peers", &self.peers.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl Network {
    pub fn new(orderer: Orderer, delivery: Certificate, peers: Vec<Peer>, clock: Arc<dyn Clock>) -> Self {
        let channel_id = orderer.config().channel_id.clone();
        Network {
            channel_id,
            orderer: Mutex::new(orderer),
            delivery,
            peers: peers
                .into_iter()
                .map(|p| (p.msp_id().to_owned(), RwLock::new(p)))
                .collect(),
            clock,
            online: AtomicBool::new(true),
        }
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn channel_id(&self) -> &str {
        &self.channel_id
    }

    pub fn config(&self) -> ChannelConfig {
        self.orderer.lock().expect("orderer lock").config().clone()
    }

    pub fn peer_msps(&self) -> Vec<String> {
        self.peers.keys().cloned().collect()
    }

    /// Runs `f` with shared access to the peer of `msp_id`.
    pub fn with_peer<R>(&self, msp_id: &str, f: impl FnOnce(&Peer) -> R) -> Result<R, NetworkError> {
        let peer = self
            .peers
            .get(msp_id)
            .ok_or_else(|| NetworkError::UnknownOrg(msp_id.into()))?;
        Ok(f(&peer.read().expect("peer lock")))
    }

    pub fn with_peer_mut<R>(&self, msp_id: &str, f: impl FnOnce(&mut Peer) -> R) -> Result<R, NetworkError> {
        let peer = self
            .peers
            .get(msp_id)
            .ok_or_else(|| NetworkError::UnknownOrg(msp_id.into()))?;
        Ok(f(&mut peer.write().expect("peer lock")))
    }

    pub fn with_orderer<R>(&self, f: impl FnOnce(&Orderer) -> R) -> R {
        f(&self.orderer.lock().expect("orderer lock"))
    }

    /// Toggles the ordering service; while offline, broadcasts fail with
    /// `LEDGER_UNAVAILABLE`.
    pub fn set_orderer_online(&self, online: bool) {
        self.online.store(online, Ordering::SeqCst);
    }

    pub fn orderer_online(&self) -> bool {
        self.online.load(Ordering::SeqCst)
    }

    /// A travel-chaincode proposal stamped with the network clock.
    pub fn proposal(&self, identity: &SigningIdentity, function: &str, args: Vec<String>) -> Proposal {
        Proposal::new(identity, &self.channel_id, TRAVEL_CHAINCODE, function, args, self.now())
    }

    pub fn endorse(&self, msp_id: &str, proposal: &Proposal) -> Result<Endorsed, NetworkError> {
        let now = self.now();
        Ok(self.with_peer(msp_id, |p| p.endorse_proposal(proposal, now))??)
    }

    pub fn query(&self, msp_id: &str, proposal: &Proposal) -> Result<Vec<u8>, NetworkError> {
        let now = self.now();
        Ok(self.with_peer(msp_id, |p| p.query(proposal, now))??)
    }

    /// Endorses at each named peer and merges the endorsements; all peers
    /// must produce the same payload.
    pub fn endorse_all(&self, msp_ids: &[&str], proposal: &Proposal) -> Result<Endorsed, NetworkError> {
        let (first, rest) = msp_ids
            .split_first()
            .ok_or_else(|| NetworkError::UnknownOrg(String::new()))?;
        let mut merged = self.endorse(first, proposal)?;
        for msp in rest {
            let other = self.endorse(msp, proposal)?;
            if other.envelope.payload != merged.envelope.payload || other.response != merged.response {
                return Err(NetworkError::EndorsementMismatch);
            }
            merged.envelope.endorsements.extend(other.envelope.endorsements);
        }
        Ok(merged)
    }

    pub fn broadcast(&self, tx: crate::ledger::TransactionEnvelope) -> Result<(), NetworkError> {
        if !self.orderer_online() {
            return Err(NetworkError::Unavailable);
        }
        let now = self.now();
        self.orderer.lock().expect("orderer lock").broadcast(tx, now)?;
        Ok(())
    }

    /// Cuts due blocks and delivers everything new to every peer. Returns
    /// the number of blocks cut.
    pub fn tick(&self) -> Result<usize, NetworkError> {
        if !self.orderer_online() {
            return Ok(0);
        }
        let now = self.now();
        let cut = self.orderer.lock().expect("orderer lock").tick(now)?.len();
        self.sync_peers()?;
        Ok(cut)
    }

    /// Delivers blocks each peer is missing.
    pub fn sync_peers(&self) -> Result<(), NetworkError> {
        for peer in self.peers.values() {
            let mut peer = peer.write().expect("peer lock");
            let now = self.now();
            let blocks = self
                .orderer
                .lock()
                .expect("orderer lock")
                .deliver(&self.delivery, peer.height(), now)?;
            for block in blocks {
                peer.on_block_delivered(block)?;
            }
        }
        Ok(())
    }

    /// Endorses, broadcasts and waits until the first endorsing peer has
    /// committed the transaction or `timeout` has passed.
    pub fn submit(
        &self,
        proposal: &Proposal,
        endorsers: &[&str],
        timeout: Duration,
    ) -> Result<TxReceipt, NetworkError> {
        let endorsed = self.endorse_all(endorsers, proposal)?;
        let tx_id = endorsed.envelope.payload.tx_id.clone();
        let response = serde_json::from_slice(&endorsed.response).unwrap_or(serde_json::Value::Null);
        self.broadcast(endorsed.envelope)?;
        let observer = endorsers[0];
        let start = self.now();
        loop {
            self.tick()?;
            if let Some((block, flag)) = self.with_peer(observer, |p| p.tx_status(&tx_id))? {
                return Ok(TxReceipt {
                    tx_id,
                    block_number: Some(block),
                    validity: flag.as_str().into(),
                    response,
                });
            }
            if self.now().since(start) >= timeout {
                return Ok(TxReceipt {
                    tx_id,
                    block_number: None,
                    validity: PENDING_TIMEOUT.into(),
                    response,
                });
            }
            if !self.clock.is_simulated() {
                std::thread::sleep(Duration::from_millis(5));
            }
        }
    }
}
