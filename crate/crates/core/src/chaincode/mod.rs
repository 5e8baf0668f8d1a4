//! Chaincode execution: the stub that mediates state access and the
//! contract interface. The travel-document contract lives in [`travel`].

mod records;
mod travel;

use std::collections::BTreeMap;
use std::fmt;

use crate::channel::{ChannelConfig, CONFIG_KEY};
use crate::codec;
use crate::identity::Certificate;
use crate::ledger::{ReadEntry, Version, WorldState, WriteEntry};
use crate::time::Timestamp;

pub use records::{
    CitizenRecord, CredentialRecord, Documents, PassportApplicationRequest, PendingStatus,
    TravelRole, UserApplication, VisaApplication, VisaApplicationStatus, VisaRecord,
    PassportRecord,
};
pub(crate) use records::valid_country;
pub use travel::{
    is_query_function, keys, password_digest, TravelConfig, TravelContract, FUNCTIONS,
    INVOKE_FUNCTIONS, QUERY_FUNCTIONS, SALT_LEN, TRAVEL_CHAINCODE, TRAVEL_VERSION, VISA_TYPES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Invoke,
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaincodeError {
    pub code: &'static str,
    pub message: String,
}

impl ChaincodeError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        ChaincodeError {
            code,
            message: message.into(),
        }
    }

    /// `VALIDATION` naming the violated field rule.
    pub fn validation(rule: &str) -> Self {
        ChaincodeError::new("VALIDATION", rule)
    }

    /// The rule name of a `VALIDATION` error.
    pub fn rule(&self) -> Option<&str> {
        (self.code == "VALIDATION").then_some(self.message.as_str())
    }
}

impl fmt::Display for ChaincodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.code, self.message.is_empty()) {
            ("VALIDATION", _) => write!(f, "VALIDATION({})", self.message),
            (code, true) => f.write_str(code),
            (code, false) => write!(f, "{code}: {}", self.message),
        }
    }
}

impl std::error::Error for ChaincodeError {}

/// The only path from contract code to the world state.
///
/// Reads see the endorsement snapshot, not the call's own writes, and each
/// read records the version it observed. Writes are buffered; the last
/// write to a key wins.
pub struct ChaincodeStub<'a> {
    snapshot: &'a WorldState,
    caller: &'a Certificate,
    timestamp: Timestamp,
    mode: Mode,
    reads: BTreeMap<String, Option<Version>>,
    writes: BTreeMap<String, Option<Vec<u8>>>,
}

impl<'a> ChaincodeStub<'a> {
    pub fn new(
        snapshot: &'a WorldState,
        caller: &'a Certificate,
        timestamp: Timestamp,
        mode: Mode,
    ) -> Self {
        ChaincodeStub {
            snapshot,
            caller,
            timestamp,
            mode,
            reads: BTreeMap::new(),
            writes: BTreeMap::new(),
        }
    }

    pub fn caller(&self) -> &Certificate {
        self.caller
    }

    pub fn timestamp(&self) -> Timestamp {
        self.timestamp
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn get_state(&mut self, key: &str) -> Option<Vec<u8>> {
        let entry = self.snapshot.read_state(key);
        self.reads
            .entry(key.to_owned())
            .or_insert(entry.map(|(_, v)| v));
        entry.map(|(value, _)| value.to_vec())
    }

    /// Reads and decodes a canonical record.
    pub fn get_record<T: serde::de::DeserializeOwned>(
        &mut self,
        key: &str,
    ) -> Result<Option<T>, ChaincodeError> {
        self.get_state(key)
            .map(|bytes| {
                codec::canonical_decode(&bytes)
                    .map_err(|e| ChaincodeError::new("CORRUPT_RECORD", format!("{key}: {e}")))
            })
            .transpose()
    }

    /// Every key with `prefix`, in key order; each is recorded as read.
    pub fn scan_prefix(&mut self, prefix: &str) -> Vec<(String, Vec<u8>)> {
        let hits: Vec<_> = self
            .snapshot
            .scan_prefix(prefix)
            .map(|(k, e)| (k.to_owned(), e.value.clone(), e.version))
            .collect();
        hits.into_iter()
            .map(|(k, value, version)| {
                self.reads.entry(k.clone()).or_insert(Some(version));
                (k, value)
            })
            .collect()
    }

    pub fn put_state(&mut self, key: &str, value: Vec<u8>) -> Result<(), ChaincodeError> {
        self.write(key, Some(value))
    }

    pub fn put_record<T: serde::Serialize>(&mut self, key: &str, record: &T) -> Result<(), ChaincodeError> {
        self.put_state(key, codec::encode_record(record))
    }

    pub fn del_state(&mut self, key: &str) -> Result<(), ChaincodeError> {
        self.write(key, None)
    }

    fn write(&mut self, key: &str, value: Option<Vec<u8>>) -> Result<(), ChaincodeError> {
        if self.mode == Mode::Query {
            return Err(ChaincodeError::new("QUERY_WROTE", format!("write to {key} in query mode")));
        }
        if key.is_empty() {
            return Err(ChaincodeError::new("BAD_KEY", "empty key"));
        }
        self.writes.insert(key.to_owned(), value);
        Ok(())
    }

    /// The channel configuration, read through the stub like any key.
    pub fn channel_config(&mut self) -> Result<ChannelConfig, ChaincodeError> {
        self.get_record(CONFIG_KEY)?
            .ok_or_else(|| ChaincodeError::new("NOT_FOUND", "channel configuration missing"))
    }

    /// Read and write sets, each sorted by key.
    pub fn into_rwset(self) -> (Vec<ReadEntry>, Vec<WriteEntry>) {
        let reads = self
            .reads
            .into_iter()
            .map(|(key, version)| ReadEntry { key, version })
            .collect();
        let writes = self
            .writes
            .into_iter()
            .map(|(key, value)| WriteEntry { key, value })
            .collect();
        (reads, writes)
    }
}

/// A deployable contract.
pub trait Chaincode: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    /// Routes `function`; the response is canonical-encoded.
    fn invoke(
        &self,
        function: &str,
        args: &[String],
        stub: &mut ChaincodeStub<'_>,
    ) -> Result<Vec<u8>, ChaincodeError>;
}

/// Runs `function` against `stub`. Query mode rejects any write.
pub fn dispatch(
    contract: &dyn Chaincode,
    function: &str,
    args: &[String],
    stub: &mut ChaincodeStub<'_>,
) -> Result<Vec<u8>, ChaincodeError> {
    contract.invoke(function, args, stub)
}
