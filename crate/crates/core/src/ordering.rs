//! The channel-admin ordering service.
//!
//! Admission checks endorsements against the Writers policy, accepted
//! transactions queue in arrival order, and blocks are cut by count or by
//! timeout. Block production is a constant amount of hashing per block;
//! there is no puzzle.

use std::collections::VecDeque;
use std::fmt;

use crate::channel::{ChannelConfig, CONFIG_KEY};
use crate::codec;
use crate::digest::Digest;
use crate::identity::{evaluate_policy, Certificate, SigningIdentity};
use crate::ledger::{
    data_hash, Block, BlockHeader, BlockMetadata, CommitReport, Endorsement, Ledger, LedgerError,
    TransactionEnvelope, TxPayload, ValidationCode, WriteEntry,
};
use crate::time::Timestamp;

/// Chaincode name recorded on the genesis configuration transaction.
pub const CONFIG_CHAINCODE: &str = "_config";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    BadSignature,
    PolicyDenied,
    WrongChannel,
    Busy,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::BadSignature => "BAD_SIGNATURE",
            RejectReason::PolicyDenied => "POLICY_DENIED",
            RejectReason::WrongChannel => "WRONG_CHANNEL",
            RejectReason::Busy => "BUSY",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "REJECTED({})", self.code())
    }
}

impl std::error::Error for RejectReason {}

#[derive(Debug, thiserror::Error)]
pub enum OrderingError {
    #[error("NOT_ADMIN: {0}")]
    NotAdmin(String),
    #[error("POLICY_DENIED: {0} does not satisfy the readers policy")]
    PolicyDenied(String),
    #[error("OUT_OF_RANGE: requested block {from}, height is {height}")]
    OutOfRange { from: u64, height: u64 },
    #[error("{0}")]
    Config(#[from] crate::channel::ConfigError),
    #[error("NO_GENESIS: orderer ledger holds no channel")]
    NoGenesis,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

impl OrderingError {
    pub fn code(&self) -> &'static str {
        match self {
            OrderingError::NotAdmin(_) => "NOT_ADMIN",
            OrderingError::PolicyDenied(_) => "POLICY_DENIED",
            OrderingError::OutOfRange { .. } => "OUT_OF_RANGE",
            OrderingError::Config(_) => "CONFIG_INVALID",
            OrderingError::NoGenesis => "NO_GENESIS",
            OrderingError::Ledger(e) => e.code(),
        }
    }
}

/// Builds the genesis block for `config`, signed by the orderer.
pub fn create_channel(
    config: &ChannelConfig,
    orderer: &SigningIdentity,
    timestamp: Timestamp,
) -> Result<Block, OrderingError> {
    config.validate()?;
    let cert = orderer.certificate();
    if *cert != config.orderer_certificate {
        return Err(OrderingError::NotAdmin(format!(
            "{} is not the channel orderer",
            cert.display_name()
        )));
    }
    if !config.verify_member(cert, timestamp)
        || !evaluate_policy(&config.admins_policy, std::slice::from_ref(cert))
    {
        return Err(OrderingError::NotAdmin(format!(
            "{} does not satisfy {}",
            cert.display_name(),
            config.admins_policy
        )));
    }
    let config_bytes = codec::encode_record(config);
    let mut payload = TxPayload {
        tx_id: String::new(),
        channel_id: config.channel_id.clone(),
        chaincode_name: CONFIG_CHAINCODE.into(),
        function: "createChannel".into(),
        args: vec![],
        read_set: vec![],
        write_set: vec![WriteEntry {
            key: CONFIG_KEY.into(),
            value: Some(config_bytes),
        }],
        timestamp,
    };
    payload.tx_id = crate::digest::compute_digest(&payload.signing_bytes()).to_hex();
    let signature = orderer.sign(&payload.signing_bytes());
    let tx = TransactionEnvelope {
        payload,
        creator: cert.clone(),
        endorsements: vec![Endorsement {
            endorser: cert.clone(),
            signature,
        }],
    };
    let mut block = seal(vec![tx], 0, Digest::ZERO, orderer);
    block.metadata.validation_flags = vec![ValidationCode::Valid];
    Ok(block)
}

fn seal(
    data: Vec<TransactionEnvelope>,
    number: u64,
    prev_hash: Digest,
    orderer: &SigningIdentity,
) -> Block {
    let header = BlockHeader {
        number,
        prev_hash,
        data_hash: data_hash(&data),
    };
    let orderer_signature = orderer.sign(&header.canonical_bytes());
    Block {
        header,
        data,
        metadata: BlockMetadata {
            validation_flags: vec![],
            orderer_signature,
        },
    }
}

/// Checks a transaction for admission without enqueueing it.
pub fn admit(
    tx: &TransactionEnvelope,
    config: &ChannelConfig,
    now: Timestamp,
) -> Result<(), RejectReason> {
    if tx.payload.channel_id != config.channel_id {
        return Err(RejectReason::WrongChannel);
    }
    let bytes = tx.payload.signing_bytes();
    let mut signers = Vec::with_capacity(tx.endorsements.len());
    for e in &tx.endorsements {
        if !config.verify_member(&e.endorser, now)
            || !crate::identity::verify_signature(&e.endorser, &bytes, &e.signature)
        {
            return Err(RejectReason::BadSignature);
        }
        signers.push(e.endorser.clone());
    }
    if signers.is_empty() || !evaluate_policy(&config.writers_policy, &signers) {
        return Err(RejectReason::PolicyDenied);
    }
    Ok(())
}

/// Pending admitted transactions and the time of the last cut.
#[derive(Debug, Clone)]
pub struct OrdererQueue {
    pub pending: VecDeque<TransactionEnvelope>,
    pub last_cut: Timestamp,
}

impl OrdererQueue {
    pub fn new(last_cut: Timestamp) -> Self {
        OrdererQueue {
            pending: VecDeque::new(),
            last_cut,
        }
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Cuts one block if the queue is full or the timeout has elapsed.
pub fn cut_block(
    queue: &mut OrdererQueue,
    config: &ChannelConfig,
    now: Timestamp,
    prev: &BlockHeader,
    orderer: &SigningIdentity,
) -> Option<Block> {
    let max = config.batch_max_count as usize;
    let due = queue.pending.len() >= max
        || (!queue.pending.is_empty() && now.since(queue.last_cut) >= config.batch_timeout());
    if !due {
        return None;
    }
    let take = max.min(queue.pending.len());
    let data: Vec<_> = queue.pending.drain(..take).collect();
    queue.last_cut = now;
    Some(seal(data, prev.number + 1, prev.digest(), orderer))
}

/// A single ordering node with its own copy of the block log.
pub struct Orderer {
    identity: SigningIdentity,
    config: ChannelConfig,
    ledger: Ledger,
    queue: OrdererQueue,
}

impl fmt::Debug for Orderer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Orderer")
            .field("channel", &self.config.channel_id)
            .field("height", &self.ledger.height())
            .field("pending", &self.queue.len())
            .finish()
    }
}

impl Orderer {
    /// Starts an orderer over `ledger`, which must already hold the genesis
    /// block.
    pub fn new(identity: SigningIdentity, ledger: Ledger, now: Timestamp) -> Result<Self, OrderingError> {
        let config = ledger.config().cloned().ok_or(OrderingError::NoGenesis)?;
        if *identity.certificate() != config.orderer_certificate {
            return Err(OrderingError::NotAdmin(format!(
                "{} is not the channel orderer",
                identity.certificate().display_name()
            )));
        }
        Ok(Orderer {
            identity,
            config,
            ledger,
            queue: OrdererQueue::new(now),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn height(&self) -> u64 {
        self.ledger.height()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Admits `tx` and enqueues it, or rejects it.
    pub fn broadcast(&mut self, tx: TransactionEnvelope, now: Timestamp) -> Result<(), RejectReason> {
        if tx.payload.channel_id != self.config.channel_id {
            return Err(RejectReason::WrongChannel);
        }
        if self.queue.len() >= self.config.max_pending as usize {
            return Err(RejectReason::Busy);
        }
        admit(&tx, &self.config, now)?;
        self.queue.pending.push_back(tx);
        Ok(())
    }

    /// Cuts and commits every block that is due at `now`.
    pub fn tick(&mut self, now: Timestamp) -> Result<Vec<CommitReport>, OrderingError> {
        let mut reports = Vec::new();
        loop {
            let prev = self
                .ledger
                .chain()
                .last_header()
                .ok_or(OrderingError::NoGenesis)?
                .clone();
            let Some(block) = cut_block(&mut self.queue, &self.config, now, &prev, &self.identity) else {
                break;
            };
            reports.push(self.ledger.commit(block)?);
        }
        Ok(reports)
    }

    /// Blocks numbered `from` and above, for a requester allowed to read.
    pub fn deliver(
        &self,
        requester: &Certificate,
        from: u64,
        now: Timestamp,
    ) -> Result<Vec<Block>, OrderingError> {
        if !self.config.verify_member(requester, now)
            || !evaluate_policy(&self.config.readers_policy, std::slice::from_ref(requester))
        {
            return Err(OrderingError::PolicyDenied(requester.display_name()));
        }
        let height = self.height();
        if from > height {
            return Err(OrderingError::OutOfRange { from, height });
        }
        Ok(self.ledger.chain().blocks()[from as usize..].to_vec())
    }
}
