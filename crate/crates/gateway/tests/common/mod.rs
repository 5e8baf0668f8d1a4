#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use passchain_core::network::{bootstrap, bootstrap_in_memory, Deployment, Topology};
use passchain_core::time::{Clock, Timestamp};
use passchain_gateway::{Gateway, GatewayConfig, LoginForm, PassportForm, Session};
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
"#;

/// Steps like a simulated clock and can also be pushed forward.
#[derive(Debug)]
pub struct TestClock {
    now: AtomicI64,
    step: i64,
}

impl TestClock {
    pub fn new() -> Arc<Self> {
        let start: Timestamp = "2021-01-01T00:00:00Z".parse().unwrap();
        Arc::new(TestClock {
            now: AtomicI64::new(start.millis()),
            step: 50,
        })
    }

    pub fn advance(&self, d: Duration) {
        self.now.fetch_add(d.as_millis() as i64, Ordering::SeqCst);
    }
}

impl Clock for TestClock {
    fn now(&self) -> Timestamp {
        Timestamp::from_millis(self.now.fetch_add(self.step, Ordering::SeqCst))
    }

    fn is_simulated(&self) -> bool {
        true
    }
}

pub fn gateway_with(seed: u64, config: GatewayConfig) -> (Arc<Gateway>, Arc<TestClock>) {
    let clock = TestClock::new();
    let topology = Topology::parse(TOPOLOGY).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = bootstrap_in_memory(&topology, &mut rng, clock.clone()).unwrap();
    (Arc::new(Gateway::new(d, config, rng)), clock)
}

pub fn gateway(seed: u64) -> Arc<Gateway> {
    gateway_with(seed, GatewayConfig::default()).0
}

pub fn persistent_gateway(seed: u64, dir: &Path) -> Arc<Gateway> {
    let topology = Topology::parse(TOPOLOGY).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d: Deployment = bootstrap(&topology, dir, &mut rng, TestClock::new()).unwrap();
    Arc::new(Gateway::new(d, GatewayConfig::default(), rng))
}

pub fn passport_form(user: &str, aadhaar: u64, password: &str) -> PassportForm {
    serde_json::from_value(serde_json::json!({
        "userId": user,
        "name": format!("Name of {user}"),
        "email": format!("{user}@example.in"),
        "phoneNumber": 9876543210u64,
        "address": "12 MG Road, Bengaluru",
        "aadhaarNumber": aadhaar,
        "password": password,
    }))
    .unwrap()
}

pub fn login(g: &Gateway, subject: &str, password: &str) -> Arc<Session> {
    let form = LoginForm {
        subject_id: subject.into(),
        password: password.into(),
    };
    let r = g.login(&form).unwrap_or_else(|e| panic!("login {subject}: {e}"));
    g.session(&r.token).unwrap()
}

/// Citizen `user` holding passport P0001, plus the agents' sessions.
pub struct World {
    pub citizen: Arc<Session>,
    pub passport_agent: Arc<Session>,
    pub france_agent: Arc<Session>,
    pub admin: Arc<Session>,
    pub passport_id: String,
}

pub fn world(g: &Gateway, user: &str) -> World {
    g.apply_passport(&passport_form(user, 123456789012, "citizen-pw")).unwrap();
    let passport_agent = login(g, "passport-agent", "passport-pw");
    let r = g.decide_passport(&passport_agent, user, "APPROVE").unwrap();
    World {
        citizen: login(g, user, "citizen-pw"),
        passport_agent,
        france_agent: login(g, "france-agent", "france-pw"),
        admin: login(g, "admin", "admin-pw"),
        passport_id: r.response["passportId"].as_str().unwrap().to_owned(),
    }
}
