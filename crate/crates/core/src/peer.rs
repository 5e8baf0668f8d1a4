//! An organization's peer: hosts chaincode, simulates proposals against a
//! state snapshot, and commits delivered blocks.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chaincode::{dispatch, Chaincode, ChaincodeError, ChaincodeStub, Mode};
use crate::channel::ChannelConfig;
use crate::codec;
use crate::digest::compute_digest;
use crate::identity::{verify_signature, Certificate, Signature, SigningIdentity};
use crate::ledger::{
    Block, CommitReport, Endorsement, Ledger, LedgerError, TransactionEnvelope, TxPayload,
    ValidationCode, WorldState,
};
use crate::time::Timestamp;

/// A client's signed request to run a chaincode function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proposal {
    pub channel_id: String,
    pub chaincode_name: String,
    pub function: String,
    pub args: Vec<String>,
    pub timestamp: Timestamp,
    pub creator: Certificate,
    pub signature: Signature,
}

#[derive(Serialize)]
struct ProposalBody<'a> {
    channel_id: &'a str,
    chaincode_name: &'a str,
    function: &'a str,
    args: &'a [String],
    timestamp: Timestamp,
    creator: &'a Certificate,
}

impl Proposal {
    pub fn new(
        identity: &SigningIdentity,
        channel_id: &str,
        chaincode_name: &str,
        function: &str,
        args: Vec<String>,
        timestamp: Timestamp,
    ) -> Self {
        let mut proposal = Proposal {
            channel_id: channel_id.into(),
            chaincode_name: chaincode_name.into(),
            function: function.into(),
            args,
            timestamp,
            creator: identity.certificate().clone(),
            signature: Signature::from_bytes(Vec::new()),
        };
        proposal.signature = identity.sign(&proposal.body_bytes());
        proposal
    }

    /// Canonical bytes covered by the creator's signature.
    pub fn body_bytes(&self) -> Vec<u8> {
        codec::encode_record(&ProposalBody {
            channel_id: &self.channel_id,
            chaincode_name: &self.chaincode_name,
            function: &self.function,
            args: &self.args,
            timestamp: self.timestamp,
            creator: &self.creator,
        })
    }

    /// Hex digest of the signed body; resubmitting the same proposal yields
    /// the same id and is caught as a duplicate.
    pub fn tx_id(&self) -> String {
        compute_digest(&self.body_bytes()).to_hex()
    }

    pub fn signature_valid(&self) -> bool {
        verify_signature(&self.creator, &self.body_bytes(), &self.signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PeerError {
    #[error("NO_CHAINCODE: {0} is not installed")]
    NoChaincode(String),
    #[error("ALREADY_INSTALLED: {name} {version}")]
    AlreadyInstalled { name: String, version: String },
    #[error("BAD_CALLER_CERT: {0}")]
    BadCallerCert(String),
    #[error("WRONG_CHANNEL: peer serves {served}, proposal names {requested}")]
    WrongChannel { served: String, requested: String },
    #[error("NOT_JOINED: peer has no channel")]
    NotJoined,
    #[error("{0}")]
    Chaincode(#[from] ChaincodeError),
    #[error("{message}")]
    Commit { code: &'static str, message: String },
}

impl PeerError {
    pub fn code(&self) -> &'static str {
        match self {
            PeerError::NoChaincode(_) => "NO_CHAINCODE",
            PeerError::AlreadyInstalled { .. } => "ALREADY_INSTALLED",
            PeerError::BadCallerCert(_) => "BAD_CALLER_CERT",
            PeerError::WrongChannel { .. } => "WRONG_CHANNEL",
            PeerError::NotJoined => "NOT_JOINED",
            PeerError::Chaincode(e) => e.code,
            PeerError::Commit { code, .. } => code,
        }
    }
}

impl From<LedgerError> for PeerError {
    fn from(e: LedgerError) -> Self {
        PeerError::Commit {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

/// A simulated transaction and the chaincode's response.
#[derive(Debug, Clone)]
pub struct Endorsed {
    pub envelope: TransactionEnvelope,
    pub response: Vec<u8>,
}

struct Installed {
    version: String,
    contract: Arc<dyn Chaincode>,
}

pub struct Peer {
    identity: SigningIdentity,
    ledger: Ledger,
    installed: BTreeMap<String, Installed>,
    committed: HashMap<String, (u64, ValidationCode)>,
}

impl fmt::Debug for Peer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Peer")
            .field("identity", &self.identity.certificate().display_name())
            .field("height", &self.ledger.height())
            .field("installed", &self.installed.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Peer {
    /// A peer over an existing (possibly empty) ledger.
    pub fn new(identity: SigningIdentity, ledger: Ledger) -> Self {
        let mut committed = HashMap::new();
        for block in ledger.chain().blocks() {
            for (tx, flag) in block.data.iter().zip(&block.metadata.validation_flags) {
                committed
                    .entry(tx.payload.tx_id.clone())
                    .or_insert((block.header.number, *flag));
            }
        }
        Peer {
            identity,
            ledger,
            installed: BTreeMap::new(),
            committed,
        }
    }

    pub fn identity(&self) -> &SigningIdentity {
        &self.identity
    }

    pub fn msp_id(&self) -> &str {
        &self.identity.certificate().msp_id
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn height(&self) -> u64 {
        self.ledger.height()
    }

    pub fn state(&self) -> Arc<WorldState> {
        self.ledger.state()
    }

    pub fn config(&self) -> Option<&ChannelConfig> {
        self.ledger.config()
    }

    pub fn install_chaincode(&mut self, contract: Arc<dyn Chaincode>) -> Result<(), PeerError> {
        let name = contract.name().to_owned();
        let version = contract.version().to_owned();
        if self.installed.get(&name).is_some_and(|i| i.version == version) {
            return Err(PeerError::AlreadyInstalled { name, version });
        }
        self.installed.insert(name, Installed { version, contract });
        Ok(())
    }

    pub fn installed_version(&self, name: &str) -> Option<&str> {
        self.installed.get(name).map(|i| i.version.as_str())
    }

    fn check_proposal(&self, proposal: &Proposal, now: Timestamp) -> Result<Arc<dyn Chaincode>, PeerError> {
        let config = self.ledger.config().ok_or(PeerError::NotJoined)?;
        if proposal.channel_id != config.channel_id {
            return Err(PeerError::WrongChannel {
                served: config.channel_id.clone(),
                requested: proposal.channel_id.clone(),
            });
        }
        if !proposal.signature_valid() {
            return Err(PeerError::BadCallerCert("proposal signature does not verify".into()));
        }
        if !config.verify_member(&proposal.creator, now) {
            return Err(PeerError::BadCallerCert(format!(
                "{} is not valid in any channel msp",
                proposal.creator.display_name()
            )));
        }
        self.installed
            .get(&proposal.chaincode_name)
            .map(|i| Arc::clone(&i.contract))
            .ok_or_else(|| PeerError::NoChaincode(proposal.chaincode_name.clone()))
    }

    /// Simulates `proposal` on a snapshot of the committed state and signs
    /// the resulting read/write sets. Committed state is not touched.
    pub fn endorse_proposal(&self, proposal: &Proposal, now: Timestamp) -> Result<Endorsed, PeerError> {
        let contract = self.check_proposal(proposal, now)?;
        let snapshot = self.ledger.state();
        let mut stub = ChaincodeStub::new(&snapshot, &proposal.creator, proposal.timestamp, Mode::Invoke);
        let response = dispatch(contract.as_ref(), &proposal.function, &proposal.args, &mut stub)?;
        let (read_set, write_set) = stub.into_rwset();
        let payload = TxPayload {
            tx_id: proposal.tx_id(),
            channel_id: proposal.channel_id.clone(),
            chaincode_name: proposal.chaincode_name.clone(),
            function: proposal.function.clone(),
            args: proposal.args.clone(),
            read_set,
            write_set,
            timestamp: proposal.timestamp,
        };
        let signature = self.identity.sign(&payload.signing_bytes());
        Ok(Endorsed {
            envelope: TransactionEnvelope {
                payload,
                creator: proposal.creator.clone(),
                endorsements: vec![Endorsement {
                    endorser: self.identity.certificate().clone(),
                    signature,
                }],
            },
            response,
        })
    }

    /// Runs `proposal` in query mode; nothing is signed or ordered.
    pub fn query(&self, proposal: &Proposal, now: Timestamp) -> Result<Vec<u8>, PeerError> {
        let contract = self.check_proposal(proposal, now)?;
        let snapshot = self.ledger.state();
        let mut stub = ChaincodeStub::new(&snapshot, &proposal.creator, proposal.timestamp, Mode::Query);
        Ok(dispatch(contract.as_ref(), &proposal.function, &proposal.args, &mut stub)?)
    }

    /// Validates and commits a delivered block. A block that does not
    /// extend the local chain is refused and the state is left as it was.
    pub fn on_block_delivered(&mut self, block: Block) -> Result<CommitReport, PeerError> {
        let report = self.ledger.commit(block)?;
        for (tx_id, flag) in report.tx_ids.iter().zip(&report.validation_flags) {
            self.committed
                .entry(tx_id.clone())
                .or_insert((report.block_number, *flag));
        }
        Ok(report)
    }

    /// Block number and flag of the first commit of `tx_id`.
    pub fn tx_status(&self, tx_id: &str) -> Option<(u64, ValidationCode)> {
        self.committed.get(tx_id).copied()
    }
}
