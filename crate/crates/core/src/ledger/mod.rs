//! The two-part ledger: a hash-chained block log and the versioned world
//! state derived from it.

mod chain;
mod state;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::{self, hex_bytes_opt};
use crate::digest::{compute_digest, Digest};
use crate::identity::{verify_signature, Certificate, Signature};
use crate::time::Timestamp;

pub use chain::{
    apply_block, replay, validate_transactions, verify_chain, Chain, ChainError, CommitReport,
    IntegrityFailure, IntegrityReport, Ledger, LedgerError, ReplayError,
};
pub use state::{StateEntry, WorldState};
pub use store::{
    encode_log_record, parse_log, verify_log_bytes, LedgerStore, ParsedLog, Snapshot, LOG_FILE,
    SNAPSHOT_FILE,
};

/// Position of a committed write: (block number, index within block).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Version {
    pub block_number: u64,
    pub tx_index: u32,
}

impl Version {
    pub fn new(block_number: u64, tx_index: u32) -> Self {
        Version {
            block_number,
            tx_index,
        }
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.block_number, self.tx_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadEntry {
    pub key: String,
    /// `None` when the key did not exist at endorsement time.
    pub version: Option<Version>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriteEntry {
    pub key: String,
    /// `None` deletes the key.
    #[serde(with = "hex_bytes_opt")]
    pub value: Option<Vec<u8>>,
}

/// The signed part of a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxPayload {
    pub tx_id: String,
    pub channel_id: String,
    pub chaincode_name: String,
    pub function: String,
    pub args: Vec<String>,
    pub read_set: Vec<ReadEntry>,
    pub write_set: Vec<WriteEntry>,
    pub timestamp: Timestamp,
}

impl TxPayload {
    /// Canonical bytes every endorsement signs.
    pub fn signing_bytes(&self) -> Vec<u8> {
        codec::encode_record(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Endorsement {
    pub endorser: Certificate,
    pub signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactionEnvelope {
    pub payload: TxPayload,
    pub creator: Certificate,
    pub endorsements: Vec<Endorsement>,
}

impl TransactionEnvelope {
    pub fn tx_id(&self) -> &str {
        &self.payload.tx_id
    }

    /// True iff at least one endorsement exists and all of them verify over
    /// the payload. Certificate validity is checked separately.
    pub fn endorsements_verify(&self) -> bool {
        let bytes = self.payload.signing_bytes();
        !self.endorsements.is_empty()
            && self
                .endorsements
                .iter()
                .all(|e| verify_signature(&e.endorser, &bytes, &e.signature))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValidationCode {
    Valid,
    MvccConflict,
    DuplicateTxid,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationCode::Valid => "VALID",
            ValidationCode::MvccConflict => "MVCC_CONFLICT",
            ValidationCode::DuplicateTxid => "DUPLICATE_TXID",
        }
    }
}

impl fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockHeader {
    pub number: u64,
    pub prev_hash: Digest,
    pub data_hash: Digest,
}

impl BlockHeader {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        codec::encode_record(self)
    }

    /// Digest of the canonical header; the next block's `prev_hash`.
    pub fn digest(&self) -> Digest {
        compute_digest(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMetadata {
    pub validation_flags: Vec<ValidationCode>,
    pub orderer_signature: Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub header: BlockHeader,
    pub data: Vec<TransactionEnvelope>,
    pub metadata: BlockMetadata,
}

/// Digest of the canonical encoding of a block's transaction list.
pub fn data_hash(data: &[TransactionEnvelope]) -> Digest {
    compute_digest(&codec::encode_record(data))
}

impl Block {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        codec::encode_record(self)
    }

    pub fn number(&self) -> u64 {
        self.header.number
    }
}
