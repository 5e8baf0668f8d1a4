//! Digest-cost comparison between the ordering service and a toy
//! proof-of-work chain carrying the same transaction batches.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::ChaCha20Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::chaincode::{Chaincode, ChaincodeError, ChaincodeStub};
use crate::channel::{ChannelConfig, DEFAULT_BATCH_MAX_COUNT, DEFAULT_BATCH_TIMEOUT, DEFAULT_MAX_PENDING};
use crate::codec;
use crate::digest::{compute_digest, Digest, DigestCounter, HashAlgorithm};
use crate::identity::{parse_policy, CertificateAuthority, Role, SIGNATURE_SCHEME};
use crate::ledger::{data_hash, Block, Ledger};
use crate::network::{Network, NetworkError};
use crate::ordering::{create_channel, Orderer};
use crate::peer::{Peer, Proposal};
use crate::time::{StepClock, Timestamp};

pub const DEFAULT_POW_BITS: u32 = 20;
pub const BENCH_CHAINCODE: &str = "bench";

/// Read-modify-write of one key per call.
#[derive(Debug, Default)]
pub struct BenchChaincode;

impl Chaincode for BenchChaincode {
    fn name(&self) -> &str {
        BENCH_CHAINCODE
    }

    fn version(&self) -> &str {
        "1"
    }

    fn invoke(&self, function: &str, args: &[String], stub: &mut ChaincodeStub<'_>) -> Result<Vec<u8>, ChaincodeError> {
        match (function, args) {
            ("put", [key, value]) => {
                let previous = stub.get_state(key);
                stub.put_state(key, value.as_bytes().to_vec())?;
                Ok(codec::encode_record(&previous.map(hex::encode)))
            }
            _ => Err(ChaincodeError::new("UNKNOWN_FUNCTION", function)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathReport {
    pub txs: u64,
    pub blocks: u64,
    pub digest_evaluations: u64,
    #[serde(serialize_with = "millis")]
    pub wall: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u64(d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PowReport {
    pub difficulty_bits: u32,
    pub path: PathReport,
    pub trials_per_block: Vec<u64>,
}

impl PowReport {
    pub fn mean_trials(&self) -> f64 {
        self.trials_per_block.iter().sum::<u64>() as f64 / self.trials_per_block.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchReport {
    pub orderer: PathReport,
    pub pow: PowReport,
}

impl BenchReport {
    /// PoW digest evaluations per orderer-path evaluation.
    pub fn ratio(&self) -> f64 {
        self.pow.path.digest_evaluations as f64 / self.orderer.digest_evaluations.max(1) as f64
    }
}

/// Commits `txs` synthetic transactions through endorse, broadcast, cut and
/// commit, returning the report and the committed blocks after genesis.
pub fn bench_orderer(txs: usize, seed: u64) -> Result<(PathReport, Vec<Block>), NetworkError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let start: Timestamp = "2021-01-01T00:00:00Z".parse().expect("literal timestamp");
    let clock = Arc::new(StepClock::new(start, Duration::from_millis(10)));
    let until = start.saturating_add(Duration::from_secs(365 * 24 * 3600));
    let ca = CertificateAuthority::generate("OrdererMSP", &mut rng, until);
    let orderer_id = ca.enroll("orderer", Role::Admin, &mut rng, until);
    let peer_id = ca.enroll("peer0", Role::Member, &mut rng, until);
    let client = ca.enroll("client", Role::Member, &mut rng, until);
    let config = ChannelConfig {
        channel_id: "bench".into(),
        hash_function: HashAlgorithm::Sha256,
        signature_scheme: SIGNATURE_SCHEME.into(),
        msps: vec![ca.msp_config(vec!["orderer".into()])],
        readers_policy: parse_policy("OR('OrdererMSP.member')").expect("policy"),
        writers_policy: parse_policy("OR('OrdererMSP.member')").expect("policy"),
        admins_policy: parse_policy("OR('OrdererMSP.admin')").expect("policy"),
        batch_max_count: DEFAULT_BATCH_MAX_COUNT,
        batch_timeout_ms: DEFAULT_BATCH_TIMEOUT.as_millis() as u64,
        max_pending: DEFAULT_MAX_PENDING,
        orderer_certificate: orderer_id.certificate().clone(),
    };
    let genesis = create_channel(&config, &orderer_id, start)?;
    let mut orderer_ledger = Ledger::in_memory();
    orderer_ledger.commit(genesis.clone())?;
    let mut peer_ledger = Ledger::in_memory();
    peer_ledger.commit(genesis)?;
    let mut peer = Peer::new(peer_id, peer_ledger);
    peer.install_chaincode(Arc::new(BenchChaincode))?;
    let orderer = Orderer::new(orderer_id.clone(), orderer_ledger, start)?;
    let network = Network::new(orderer, orderer_id.certificate().clone(), vec![peer], clock.clone());

    let counter = DigestCounter::start();
    let began = Instant::now();
    for i in 0..txs {
        let proposal = Proposal::new(
            &client,
            "bench",
            BENCH_CHAINCODE,
            "put",
            vec![format!("k{i:06}"), format!("v{i}")],
            network.now(),
        );
        let endorsed = network.endorse("OrdererMSP", &proposal)?;
        network.broadcast(endorsed.envelope)?;
    }
    let target_txs: usize = txs;
    loop {
        network.tick()?;
        let committed = network.with_peer("OrdererMSP", |p| {
            p.ledger().chain().blocks()[1..].iter().map(|b| b.data.len()).sum::<usize>()
        })?;
        if committed >= target_txs {
            break;
        }
    }
    let wall = began.elapsed();
    let digest_evaluations = counter.count();
    let blocks = network.with_peer("OrdererMSP", |p| p.ledger().chain().blocks()[1..].to_vec())?;
    Ok((
        PathReport {
            txs: txs as u64,
            blocks: blocks.len() as u64,
            digest_evaluations,
            wall,
        },
        blocks,
    ))
}

/// Searches nonces from zero until `H(header ‖ nonce)` has `bits` leading
/// zero bits. Returns the nonce, the winning digest and the trial count.
pub fn mine(number: u64, prev_hash: &Digest, data_hash: &Digest, bits: u32) -> (u64, Digest, u64) {
    #[derive(Serialize)]
    struct PowHeader<'a> {
        number: u64,
        prev_hash: &'a Digest,
        data_hash: &'a Digest,
    }
    let mut buf = codec::encode_record(&PowHeader {
        number,
        prev_hash,
        data_hash,
    });
    let prefix = buf.len();
    buf.extend_from_slice(&[0u8; 8]);
    let mut nonce = 0u64;
    loop {
        buf[prefix..].copy_from_slice(&nonce.to_be_bytes());
        let digest = compute_digest(&buf);
        if digest.leading_zero_bits() >= bits {
            return (nonce, digest, nonce + 1);
        }
        nonce += 1;
    }
}

/// Mines one proof-of-work block per batch in `blocks`.
pub fn bench_pow(blocks: &[Block], bits: u32) -> PowReport {
    let counter = DigestCounter::start();
    let began = Instant::now();
    let mut prev = Digest::ZERO;
    let mut trials_per_block = Vec::with_capacity(blocks.len());
    for (i, block) in blocks.iter().enumerate() {
        let data = data_hash(&block.data);
        let (_, digest, trials) = mine(i as u64 + 1, &prev, &data, bits);
        trials_per_block.push(trials);
        prev = digest;
    }
    PowReport {
        difficulty_bits: bits,
        path: PathReport {
            txs: blocks.iter().map(|b| b.data.len() as u64).sum(),
            blocks: blocks.len() as u64,
            digest_evaluations: counter.count(),
            wall: began.elapsed(),
        },
        trials_per_block,
    }
}

pub fn bench_consensus(txs: usize, pow_bits: u32, seed: u64) -> Result<BenchReport, NetworkError> {
    let (orderer, blocks) = bench_orderer(txs, seed)?;
    let pow = bench_pow(&blocks, pow_bits);
    Ok(BenchReport { orderer, pow })
}
