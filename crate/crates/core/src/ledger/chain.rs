use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::store::LedgerStore;
use super::{data_hash, Block, BlockHeader, ValidationCode, Version, WorldState};
use crate::channel::{ChannelConfig, CONFIG_KEY};
use crate::codec;
use crate::digest::Digest;
use crate::identity::{verify_signature, Certificate};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("CHAIN_GAP: expected block {expected}, got {got}")]
    ChainGap { expected: u64, got: u64 },
    #[error("HASH_MISMATCH: {0}")]
    HashMismatch(&'static str),
    #[error("BAD_ORDERER_SIG: block {0}")]
    BadOrdererSig(u64),
    #[error("BAD_GENESIS: {0}")]
    BadGenesis(String),
}

impl ChainError {
    pub fn code(&self) -> &'static str {
        match self {
            ChainError::ChainGap { .. } => "CHAIN_GAP",
            ChainError::HashMismatch(_) => "HASH_MISMATCH",
            ChainError::BadOrdererSig(_) => "BAD_ORDERER_SIG",
            ChainError::BadGenesis(_) => "BAD_GENESIS",
        }
    }
}

/// Extracts the channel configuration carried by a genesis block.
pub(crate) fn genesis_config(block: &Block) -> Result<ChannelConfig, ChainError> {
    let [tx] = block.data.as_slice() else {
        return Err(ChainError::BadGenesis(format!(
            "expected exactly one configuration transaction, found {}",
            block.data.len()
        )));
    };
    let value = tx
        .payload
        .write_set
        .iter()
        .find(|w| w.key == CONFIG_KEY)
        .and_then(|w| w.value.as_deref())
        .ok_or_else(|| ChainError::BadGenesis("no CONFIG write".into()))?;
    let config: ChannelConfig = codec::canonical_decode(value)
        .map_err(|e| ChainError::BadGenesis(e.to_string()))?;
    config
        .validate()
        .map_err(|e| ChainError::BadGenesis(e.to_string()))?;
    Ok(config)
}

/// Structural append checks that need no signature verification.
fn check_linkage(block: &Block, expected: u64, prev: Option<&BlockHeader>) -> Result<(), ChainError> {
    if block.header.number != expected {
        return Err(ChainError::ChainGap {
            expected,
            got: block.header.number,
        });
    }
    let want_prev = prev.map_or(Digest::ZERO, BlockHeader::digest);
    if block.header.prev_hash != want_prev {
        return Err(ChainError::HashMismatch("prev_hash"));
    }
    if block.header.data_hash != data_hash(&block.data) {
        return Err(ChainError::HashMismatch("data_hash"));
    }
    Ok(())
}

fn orderer_signature_ok(block: &Block, orderer: &Certificate) -> bool {
    verify_signature(
        orderer,
        &block.header.canonical_bytes(),
        &block.metadata.orderer_signature,
    )
}

/// The append-only block log.
#[derive(Debug, Clone, Default)]
pub struct Chain {
    blocks: Vec<Block>,
    config: Option<ChannelConfig>,
    tx_ids: HashSet<String>,
}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, number: u64) -> Option<&Block> {
        self.blocks.get(number as usize)
    }

    pub fn last_header(&self) -> Option<&BlockHeader> {
        self.blocks.last().map(|b| &b.header)
    }

    /// Configuration from the genesis block, once appended.
    pub fn config(&self) -> Option<&ChannelConfig> {
        self.config.as_ref()
    }

    pub fn contains_tx(&self, tx_id: &str) -> bool {
        self.tx_ids.contains(tx_id)
    }

    /// Checks every precondition of [`Chain::append_block`] without mutating.
    pub fn check_append(&self, block: &Block) -> Result<(), ChainError> {
        check_linkage(block, self.height(), self.last_header())?;
        let genesis;
        let orderer = match &self.config {
            Some(config) => &config.orderer_certificate,
            None => {
                genesis = genesis_config(block)?;
                &genesis.orderer_certificate
            }
        };
        if !orderer_signature_ok(block, orderer) {
            return Err(ChainError::BadOrdererSig(block.header.number));
        }
        Ok(())
    }

    pub fn append_block(&mut self, block: Block) -> Result<(), ChainError> {
        self.check_append(&block)?;
        self.push_unchecked(block);
        Ok(())
    }

    fn push_unchecked(&mut self, block: Block) {
        if self.blocks.is_empty() {
            self.config = genesis_config(&block).ok();
        }
        self.tx_ids
            .extend(block.data.iter().map(|tx| tx.payload.tx_id.clone()));
        self.blocks.push(block);
    }
}

/// MVCC validation of every transaction in `block` against `state`.
///
/// A transaction's reads are compared against the state as updated by the
/// earlier VALID transactions of the same block, and it may not write a key
/// that one of them wrote. `is_committed` reports tx ids already in the log.
pub fn validate_transactions(
    block: &Block,
    state: &WorldState,
    is_committed: impl Fn(&str) -> bool,
) -> Vec<ValidationCode> {
    let mut written: HashMap<&str, Option<Version>> = HashMap::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut flags = Vec::with_capacity(block.data.len());
    for (index, tx) in block.data.iter().enumerate() {
        let payload = &tx.payload;
        if is_committed(&payload.tx_id) || !seen.insert(&payload.tx_id) {
            flags.push(ValidationCode::DuplicateTxid);
            continue;
        }
        let reads_match = payload.read_set.iter().all(|read| {
            let current = match written.get(read.key.as_str()) {
                Some(v) => *v,
                None => state.version(&read.key),
            };
            current == read.version
        });
        let writes_free = payload
            .write_set
            .iter()
            .all(|w| !written.contains_key(w.key.as_str()));
        if !(reads_match && writes_free) {
            flags.push(ValidationCode::MvccConflict);
            continue;
        }
        let version = Version::new(block.header.number, index as u32);
        for w in &payload.write_set {
            written.insert(&w.key, w.value.as_ref().map(|_| version));
        }
        flags.push(ValidationCode::Valid);
    }
    flags
}

/// Returns `state` with the VALID transactions of `block` applied.
pub fn apply_block(state: &WorldState, block: &Block, flags: &[ValidationCode]) -> WorldState {
    let mut next = state.clone();
    next.apply(block, flags);
    next
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityFailure {
    pub block_number: u64,
    pub reason: String,
}

impl fmt::Display for IntegrityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {}: {}", self.block_number, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub height: u64,
    pub failure: Option<IntegrityFailure>,
}

impl IntegrityReport {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for IntegrityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.failure {
            None => write!(f, "OK ({} blocks)", self.height),
            Some(failure) => write!(f, "FAILED at {failure}"),
        }
    }
}

/// Runs all integrity checks on `blocks`, returning the lowest failing block
/// (if any) and the replayed state of the verified prefix.
///
/// Cheap checks run first over the whole chain; each later pass only looks
/// at blocks before the earliest failure found so far.
pub(crate) fn check_blocks(blocks: &[Block]) -> (Option<IntegrityFailure>, WorldState) {
    let mut failure: Option<IntegrityFailure> = None;
    let mut limit = blocks.len();
    let mut fail = |at: usize, reason: String, limit: &mut usize| {
        if at < *limit {
            *limit = at;
            failure = Some(IntegrityFailure {
                block_number: at as u64,
                reason,
            });
        }
    };

    // linkage, data hashes, flag shape and genesis
    let mut config = None;
    for i in 0..limit {
        let block = &blocks[i];
        let prev = i.checked_sub(1).map(|p| &blocks[p].header);
        if let Err(e) = check_linkage(block, i as u64, prev) {
            fail(i, e.to_string(), &mut limit);
            break;
        }
        if block.metadata.validation_flags.len() != block.data.len() {
            fail(i, "validation flags do not match transaction count".into(), &mut limit);
            break;
        }
        if i == 0 {
            match genesis_config(block) {
                Ok(c) => config = Some(c),
                Err(e) => {
                    fail(0, e.to_string(), &mut limit);
                    break;
                }
            }
        }
    }

    // recorded flags must equal a fresh validation
    let mut state = WorldState::new();
    let mut committed: HashSet<&str> = HashSet::new();
    for i in 0..limit {
        let block = &blocks[i];
        let flags = validate_transactions(block, &state, |id| committed.contains(id));
        if flags != block.metadata.validation_flags {
            fail(i, "validation flags differ from replay".into(), &mut limit);
            break;
        }
        state.apply(block, &flags);
        committed.extend(block.data.iter().map(|tx| tx.payload.tx_id.as_str()));
    }

    // orderer signatures
    if let Some(config) = config.filter(|_| limit > 0) {
        let orderer = &config.orderer_certificate;
        let genesis_ts = blocks[0].data[0].payload.timestamp;
        if !config.verify_member(orderer, genesis_ts) {
            fail(0, "orderer certificate not issued by its msp".into(), &mut limit);
        }
        for i in 0..limit {
            if !orderer_signature_ok(&blocks[i], orderer) {
                fail(i, format!("BAD_ORDERER_SIG: block {i}"), &mut limit);
                break;
            }
        }
    }

    if failure.is_some() {
        // the state above may include blocks past the failure; rebuild the prefix
        state = WorldState::new();
        let mut committed: HashSet<&str> = HashSet::new();
        for block in &blocks[..limit] {
            let flags = validate_transactions(block, &state, |id| committed.contains(id));
            state.apply(block, &flags);
            committed.extend(block.data.iter().map(|tx| tx.payload.tx_id.as_str()));
        }
    }
    (failure, state)
}

/// Integrity of a block log: OK, or the first block whose linkage, data
/// hash, validation flags or orderer signature is wrong.
pub fn verify_chain(blocks: &[Block]) -> IntegrityReport {
    let (failure, _) = check_blocks(blocks);
    IntegrityReport {
        height: blocks.len() as u64,
        failure,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("CORRUPT_CHAIN: {0}")]
pub struct ReplayError(pub IntegrityFailure);

/// Rebuilds the world state by validating and applying every block from
/// genesis.
pub fn replay(blocks: &[Block]) -> Result<WorldState, ReplayError> {
    match check_blocks(blocks) {
        (None, state) => Ok(state),
        (Some(failure), _) => Err(ReplayError(failure)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitReport {
    pub block_number: u64,
    pub tx_ids: Vec<String>,
    pub validation_flags: Vec<ValidationCode>,
}

impl CommitReport {
    pub fn flag_for(&self, tx_id: &str) -> Option<ValidationCode> {
        self.tx_ids
            .iter()
            .position(|t| t == tx_id)
            .map(|i| self.validation_flags[i])
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Corrupt(#[from] ReplayError),
    #[error("ledger io: {0}")]
    Io(#[from] std::io::Error),
}

impl LedgerError {
    pub fn code(&self) -> &'static str {
        match self {
            LedgerError::Chain(e) => e.code(),
            LedgerError::Corrupt(_) => "CORRUPT_CHAIN",
            LedgerError::Io(_) => "LEDGER_IO",
        }
    }
}

/// A block log with its live world state, optionally persisted.
#[derive(Debug)]
pub struct Ledger {
    chain: Chain,
    state: Arc<WorldState>,
    store: Option<LedgerStore>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl Ledger {
    pub fn in_memory() -> Self {
        Ledger {
            chain: Chain::new(),
            state: Arc::new(WorldState::new()),
            store: None,
        }
    }

    /// Opens (or creates) the ledger persisted under `dir`, verifying and
    /// replaying its block log. The snapshot file is rewritten if it
    /// disagrees with the replayed state.
    pub fn open(dir: &Path) -> Result<Self, LedgerError> {
        let (store, blocks) = LedgerStore::open(dir)?;
        let state = replay(&blocks)?;
        let mut chain = Chain::new();
        for block in blocks {
            chain.push_unchecked(block);
        }
        let ledger = Ledger {
            chain,
            state: Arc::new(state),
            store: Some(store),
        };
        if let Some(store) = &ledger.store {
            let height = ledger.chain.height();
            let current = store.read_snapshot().ok().flatten();
            let matches = current.is_some_and(|s| {
                s.last_block == height.checked_sub(1) && s.entries == *ledger.state
            });
            if !matches && height > 0 {
                tracing::warn!(dir = %dir.display(), "snapshot stale or missing; rewriting from replay");
                store.write_snapshot(&ledger.state, height - 1)?;
            }
        }
        Ok(ledger)
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn height(&self) -> u64 {
        self.chain.height()
    }

    /// Immutable snapshot of the current world state.
    pub fn state(&self) -> Arc<WorldState> {
        Arc::clone(&self.state)
    }

    pub fn config(&self) -> Option<&ChannelConfig> {
        self.chain.config()
    }

    pub fn is_persistent(&self) -> bool {
        self.store.is_some()
    }

    /// Validates `block`, records its flags, appends it and applies its
    /// VALID writes. On error nothing changes.
    pub fn commit(&mut self, mut block: Block) -> Result<CommitReport, LedgerError> {
        self.chain.check_append(&block)?;
        let flags = validate_transactions(&block, &self.state, |id| self.chain.contains_tx(id));
        block.metadata.validation_flags = flags.clone();
        if let Some(store) = &mut self.store {
            store.append(&block)?;
        }
        let report = CommitReport {
            block_number: block.header.number,
            tx_ids: block.data.iter().map(|t| t.payload.tx_id.clone()).collect(),
            validation_flags: flags.clone(),
        };
        Arc::make_mut(&mut self.state).apply(&block, &flags);
        self.chain.push_unchecked(block);
        if let Some(store) = &self.store {
            store.write_snapshot(&self.state, report.block_number)?;
        }
        Ok(report)
    }
}
