use std::collections::BTreeMap;
use std::ops::Bound;

use serde::{Deserialize, Serialize};

use super::{Block, ValidationCode, Version};
use crate::codec::{self, hex_bytes};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    #[serde(with = "hex_bytes")]
    pub value: Vec<u8>,
    pub version: Version,
}

/// Current key → (value, version) view of the ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorldState {
    entries: BTreeMap<String, StateEntry>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&StateEntry> {
        self.entries.get(key)
    }

    /// Current value and version of `key`, if present.
    pub fn read_state(&self, key: &str) -> Option<(&[u8], Version)> {
        self.entries
            .get(key)
            .map(|e| (e.value.as_slice(), e.version))
    }

    pub fn version(&self, key: &str) -> Option<Version> {
        self.entries.get(key).map(|e| e.version)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &StateEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Entries whose key starts with `prefix`, in key order.
    pub fn scan_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a StateEntry)> + 'a {
        self.entries
            .range::<str, _>((Bound::Included(prefix), Bound::Unbounded))
            .take_while(move |(k, _)| k.starts_with(prefix))
            .map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn put(&mut self, key: String, value: Vec<u8>, version: Version) {
        self.entries.insert(key, StateEntry { value, version });
    }

    pub(crate) fn delete(&mut self, key: &str) {
        self.entries.remove(key);
    }

    /// Applies the writes of every VALID transaction in `block`, in order.
    pub(crate) fn apply(&mut self, block: &Block, flags: &[ValidationCode]) {
        for (index, (tx, flag)) in block.data.iter().zip(flags).enumerate() {
            if *flag != ValidationCode::Valid {
                continue;
            }
            let version = Version::new(block.header.number, index as u32);
            for write in &tx.payload.write_set {
                match &write.value {
                    Some(value) => self.put(write.key.clone(), value.clone(), version),
                    None => self.delete(&write.key),
                }
            }
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        codec::encode_record(self)
    }
}
