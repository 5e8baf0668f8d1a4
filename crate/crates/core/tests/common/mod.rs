#![allow(dead_code)]

pub mod mini;
pub mod sim;

use std::sync::Arc;
use std::time::Duration;

use passchain_core::chaincode::{password_digest, PassportApplicationRequest, SALT_LEN};
use passchain_core::codec;
use passchain_core::identity::{Role, SigningIdentity};
use passchain_core::network::{bootstrap_in_memory, Deployment, Topology, TxReceipt, RECEIPT_TIMEOUT};
use passchain_core::time::{StepClock, Timestamp};
use rand::rngs::ChaCha20Rng;
use rand::SeedableRng;

pub const TOPOLOGY: &str = r#"
channel_id = "travelchannel"

[orderer]
msp_id = "OrdererMSP"
admin = { subject_id = "admin", password = "admin-pw" }

[passport_office]
msp_id = "PassportOfficeMSP"
agent = { subject_id = "passport-agent", password = "passport-pw" }

[[visa_offices]]
msp_id = "FranceVisaMSP"
country = "France"
agent = { subject_id = "france-agent", password = "france-pw" }

[[visa_offices]]
msp_id = "JapanVisaMSP"
country = "Japan"
agent = { subject_id = "japan-agent", password = "japan-pw" }

[batch]
max_count = 10
timeout_ms = 2000
"#;

pub fn start() -> Timestamp {
    "2021-01-01T00:00:00Z".parse().unwrap()
}

pub fn deploy(seed: u64) -> Deployment {
    let topology = Topology::parse(TOPOLOGY).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let clock = Arc::new(StepClock::new(start(), Duration::from_millis(50)));
    bootstrap_in_memory(&topology, &mut rng, clock).unwrap()
}

/// Session-style identity for `subject`, issued by the CA of `msp`.
pub fn enroll(d: &Deployment, msp: &str, subject: &str, role: Role, seed: u64) -> SigningIdentity {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let until = d.network.now().saturating_add(Duration::from_secs(3600));
    d.authority(msp).unwrap().enroll(subject, role, &mut rng, until)
}

pub fn passport_request(user: &str, aadhaar: u64, password: &str) -> String {
    let salt = [7u8; SALT_LEN];
    let req = PassportApplicationRequest {
        user_id: user.into(),
        name: format!("Name of {user}"),
        email: format!("{user}@example.in"),
        phone_number: 9876543210,
        address: "12 MG Road, Bengaluru".into(),
        aadhaar_number: aadhaar,
        salt: salt.to_vec(),
        password_digest: password_digest(&salt, password),
    };
    String::from_utf8(codec::canonical_encode(&req).unwrap()).unwrap()
}

pub fn endorsers<'a>(d: &'a Deployment, msp: &'a str) -> Vec<&'a str> {
    let orderer = d.manifest.orderer_msp();
    if msp == orderer {
        vec![orderer]
    } else {
        vec![msp, orderer]
    }
}

pub fn invoke(d: &Deployment, who: &SigningIdentity, function: &str, args: &[&str]) -> TxReceipt {
    let proposal = d
        .network
        .proposal(who, function, args.iter().map(|s| s.to_string()).collect());
    let msp = who.certificate().msp_id.clone();
    d.network
        .submit(&proposal, &endorsers(d, &msp), RECEIPT_TIMEOUT)
        .unwrap_or_else(|e| panic!("{function}: {e}"))
}

pub fn query(d: &Deployment, who: &SigningIdentity, function: &str, args: &[&str]) -> serde_json::Value {
    let proposal = d
        .network
        .proposal(who, function, args.iter().map(|s| s.to_string()).collect());
    let bytes = d
        .network
        .query(&who.certificate().msp_id, &proposal)
        .unwrap_or_else(|e| panic!("{function}: {e}"));
    serde_json::from_slice(&bytes).unwrap()
}
