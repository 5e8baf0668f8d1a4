//! Core of a small permissioned blockchain for passport and visa records.

pub mod bench;
pub mod chaincode;
pub mod channel;
pub mod codec;
pub mod digest;
pub mod identity;
pub mod ledger;
pub mod network;
pub mod ordering;
pub mod peer;
pub mod time;
pub mod wire;
