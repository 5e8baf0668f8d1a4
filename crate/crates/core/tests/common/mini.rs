//! A two-org channel built by hand, with blocks sealed through an
//! independent encoder and `sha2` rather than the crate's own helpers.

use passchain_core::channel::ChannelConfig;
use passchain_core::digest::{Digest, HashAlgorithm};
use passchain_core::identity::{parse_policy, CertificateAuthority, Role, SigningIdentity, SIGNATURE_SCHEME};
use passchain_core::ledger::{
    Block, BlockHeader, BlockMetadata, Endorsement, ReadEntry, TransactionEnvelope, TxPayload,
    Version, WriteEntry,
};
use passchain_core::ordering::create_channel;
use passchain_core::time::Timestamp;
use rand::rngs::ChaCha20Rng;
use rand::SeedableRng;
use serde_json::Value;
use sha2::{Digest as _, Sha256};
use std::time::Duration;

pub const CHANNEL: &str = "minichannel";

pub struct Mini {
    pub orderer_ca: CertificateAuthority,
    pub passport_ca: CertificateAuthority,
    pub orderer: SigningIdentity,
    pub peer: SigningIdentity,
    pub outsider: SigningIdentity,
    pub config: ChannelConfig,
    pub genesis: Block,
    pub start: Timestamp,
}

/// Sorted-key, whitespace-free rendering written independently of the
/// crate's codec.
pub fn oracle_encode(v: &Value) -> String {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), oracle_encode(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => format!("[{}]", items.iter().map(oracle_encode).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

pub fn oracle_digest<T: serde::Serialize>(value: &T) -> Digest {
    let text = oracle_encode(&serde_json::to_value(value).unwrap());
    Digest::from_bytes(Sha256::digest(text.as_bytes()).into())
}

impl Mini {
    pub fn new(seed: u64, batch_max_count: u32, max_pending: u32) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let start: Timestamp = "2021-01-01T00:00:00Z".parse().unwrap();
        let until = start.saturating_add(Duration::from_secs(365 * 24 * 3600));
        let orderer_ca = CertificateAuthority::generate("OrdererMSP", &mut rng, until);
        let passport_ca = CertificateAuthority::generate("PassportOfficeMSP", &mut rng, until);
        let orderer = orderer_ca.enroll("orderer", Role::Admin, &mut rng, until);
        let peer = orderer_ca.enroll("peer0", Role::Member, &mut rng, until);
        let outsider = passport_ca.enroll("peer0", Role::Member, &mut rng, until);
        let config = ChannelConfig {
            channel_id: CHANNEL.into(),
            hash_function: HashAlgorithm::Sha256,
            signature_scheme: SIGNATURE_SCHEME.into(),
            msps: vec![
                orderer_ca.msp_config(vec!["orderer".into()]),
                passport_ca.msp_config(vec![]),
            ],
            readers_policy: parse_policy("OR('OrdererMSP.member')").unwrap(),
            writers_policy: parse_policy("OR('OrdererMSP.member')").unwrap(),
            admins_policy: parse_policy("OR('OrdererMSP.admin')").unwrap(),
            batch_max_count,
            batch_timeout_ms: 2000,
            max_pending,
            orderer_certificate: orderer.certificate().clone(),
        };
        let genesis = create_channel(&config, &orderer, start).unwrap();
        Mini {
            orderer_ca,
            passport_ca,
            orderer,
            peer,
            outsider,
            config,
            genesis,
            start,
        }
    }

    pub fn payload(&self, id: &str, reads: &[(&str, Option<Version>)], writes: &[(&str, Option<&[u8]>)]) -> TxPayload {
        TxPayload {
            tx_id: id.into(),
            channel_id: CHANNEL.into(),
            chaincode_name: "kv".into(),
            function: "set".into(),
            args: vec![],
            read_set: reads
                .iter()
                .map(|(k, v)| ReadEntry {
                    key: (*k).into(),
                    version: *v,
                })
                .collect(),
            write_set: writes
                .iter()
                .map(|(k, v)| WriteEntry {
                    key: (*k).into(),
                    value: v.map(<[u8]>::to_vec),
                })
                .collect(),
            timestamp: self.start,
        }
    }

    pub fn endorse_by(&self, payload: TxPayload, endorsers: &[&SigningIdentity]) -> TransactionEnvelope {
        let bytes = oracle_encode(&serde_json::to_value(&payload).unwrap());
        TransactionEnvelope {
            creator: self.peer.certificate().clone(),
            endorsements: endorsers
                .iter()
                .map(|e| Endorsement {
                    endorser: e.certificate().clone(),
                    signature: e.sign(bytes.as_bytes()),
                })
                .collect(),
            payload,
        }
    }

    /// A transaction endorsed by the OrdererMSP peer.
    pub fn tx(&self, id: &str, reads: &[(&str, Option<Version>)], writes: &[(&str, Option<&[u8]>)]) -> TransactionEnvelope {
        self.endorse_by(self.payload(id, reads, writes), &[&self.peer])
    }

    /// Signed block following `prev`.
    pub fn block_after(&self, prev: &BlockHeader, data: Vec<TransactionEnvelope>) -> Block {
        self.block(prev.number + 1, oracle_digest(prev), data)
    }

    pub fn block(&self, number: u64, prev_hash: Digest, data: Vec<TransactionEnvelope>) -> Block {
        let header = BlockHeader {
            number,
            prev_hash,
            data_hash: oracle_digest(&data),
        };
        let bytes = oracle_encode(&serde_json::to_value(&header).unwrap());
        Block {
            metadata: BlockMetadata {
                validation_flags: vec![],
                orderer_signature: self.orderer.sign(bytes.as_bytes()),
            },
            header,
            data,
        }
    }
}
