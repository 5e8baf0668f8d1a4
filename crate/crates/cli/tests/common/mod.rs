#![allow(dead_code)]

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

use passchain_core::ledger::{parse_log, replay, Block, WorldState, LOG_FILE};
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::StatusCode;
use serde_json::{json, Value};

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
timeout_ms = 200
"#;

pub const STEP_CLOCK: &str = "step:2021-01-01T00:00:00Z,50";

pub const LEDGERS: [&str; 5] = [
    "_orderer/travelchannel",
    "OrdererMSP/travelchannel",
    "PassportOfficeMSP/travelchannel",
    "FranceVisaMSP/travelchannel",
    "JapanVisaMSP/travelchannel",
];

pub fn write_topology(dir: &Path) -> PathBuf {
    let path = dir.join("topology.toml");
    fs::write(&path, TOPOLOGY).unwrap();
    path
}

pub fn passchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_passchain"))
        .args(args)
        .env_remove("DATA_DIR")
        .env_remove("GATEWAY_PORT")
        .output()
        .expect("run passchain")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `bootstrap` then `scenario paper-demo` on a fresh `data`, both with the
/// step clock and `seed`.
pub fn demo(root: &Path, data: &Path, seed: u64, decision: &str) -> (Output, Output) {
    let topology = write_topology(root);
    let (topology, data, seed) = (topology.to_str().unwrap(), data.to_str().unwrap(), seed.to_string());
    let common = ["--data-dir", data, "--clock", STEP_CLOCK, "--seed", &seed];
    let boot = passchain(&[&["bootstrap", "--topology", topology][..], &common].concat());
    let run = passchain(&[&["scenario", "paper-demo", "--topology", topology, "--decision", decision][..], &common].concat());
    (boot, run)
}

pub fn log_blocks(ledger_dir: &Path) -> Vec<Block> {
    let parsed = parse_log(&fs::read(ledger_dir.join(LOG_FILE)).unwrap());
    assert!(parsed.failure.is_none(), "{:?}", parsed.failure);
    parsed.blocks
}

pub fn replay_dir(ledger_dir: &Path) -> WorldState {
    replay(&log_blocks(ledger_dir)).unwrap()
}

/// Replayed state entries under `prefix`, decoded as JSON.
pub fn records(state: &WorldState, prefix: &str) -> Vec<(String, Value)> {
    state
        .iter()
        .filter(|(k, _)| k.starts_with(prefix))
        .map(|(k, e)| (k.to_owned(), serde_json::from_slice(&e.value).unwrap()))
        .collect()
}

/// A `passchain serve` child process, killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(data: &Path) -> Server {
        let mut child = Command::new(env!("CARGO_BIN_EXE_passchain"))
            .args(["serve", "--gateway-port", "0", "--data-dir", data.to_str().unwrap()])
            .env_remove("GATEWAY_PORT")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected serve output {line:?}"))
            .to_owned();
        Server { child, base }
    }

    /// SIGKILL: no shutdown hooks run.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct Api {
    base: String,
    client: Client,
}

impl Api {
    pub fn new(base: &str) -> Api {
        Api {
            base: base.to_owned(),
            client: Client::builder().timeout(Duration::from_secs(30)).build().unwrap(),
        }
    }

    fn send(&self, req: RequestBuilder, token: Option<&str>) -> (StatusCode, Value) {
        let req = match token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        let resp = req.send().unwrap();
        let status = resp.status();
        (status, resp.json().unwrap_or(Value::Null))
    }

    pub fn get(&self, path: &str, token: Option<&str>) -> (StatusCode, Value) {
        self.send(self.client.get(format!("{}{path}", self.base)), token)
    }

    pub fn post(&self, path: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        self.send(self.client.post(format!("{}{path}", self.base)).json(&body), token)
    }

    pub fn login(&self, subject: &str, password: &str) -> String {
        let (status, body) = self.post("/api/login", None, json!({"subjectId": subject, "password": password}));
        assert_eq!(status, StatusCode::OK, "login {subject}: {body}");
        body["token"].as_str().unwrap().to_owned()
    }
}

pub fn application(user: &str, aadhaar: u64, password: &str) -> Value {
    json!({
        "userId": user,
        "name": "Asha Rao",
        "email": format!("{user}@example.in"),
        "phoneNumber": 9876543210u64,
        "address": "12 MG Road, Bengaluru",
        "aadhaarNumber": aadhaar,
        "password": password,
    })
}
