mod common;

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::*;
use passchain_gateway::{http, Gateway, GatewayConfig};
use reqwest::blocking::{Client, RequestBuilder};
use reqwest::StatusCode;
use serde_json::{json, Value};

struct Api {
    base: String,
    client: Client,
}

fn start(g: Arc<Gateway>) -> Api {
    let std_listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    std_listener.set_nonblocking(true).unwrap();
    let base = format!("http://{}", std_listener.local_addr().unwrap());
    thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).unwrap();
            http::serve(listener, g, std::future::pending()).await.unwrap();
        });
    });
    Api {
        base,
        client: Client::builder().timeout(Duration::from_secs(30)).build().unwrap(),
    }
}

impl Api {
    fn send(&self, req: RequestBuilder, token: Option<&str>) -> (StatusCode, Value) {
        let req = match token {
            Some(t) => req.bearer_auth(t),
            None => req,
        };
        let resp = req.send().unwrap();
        let status = resp.status();
        let text = resp.text().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    fn get(&self, path: &str, token: Option<&str>) -> (StatusCode, Value) {
        self.send(self.client.get(format!("{}{path}", self.base)), token)
    }

    fn post(&self, path: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        self.send(self.client.post(format!("{}{path}", self.base)).json(&body), token)
    }

    fn login(&self, subject: &str, password: &str) -> String {
        let (status, body) = self.post("/api/login", None, json!({"subjectId": subject, "password": password}));
        assert_eq!(status, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_owned()
    }
}

fn application(user: &str, aadhaar: u64, password: &str) -> Value {
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

fn assert_error(got: (StatusCode, Value), status: u16, code: &str) {
    assert_eq!(got.0.as_u16(), status, "{}", got.1);
    assert_eq!(got.1["code"], code);
    assert!(got.1["message"].is_string());
    assert!(got.1["retryable"].is_boolean());
}

#[test]
fn portal_flow_over_http() {
    let api = start(gateway(21));

    let (status, receipt) = api.post("/api/citizen/passport-applications", None, application("asha", 123456789012, "pw-asha"));
    assert_eq!(status, StatusCode::OK, "{receipt}");
    assert_eq!(receipt["validity"], "VALID");
    assert!(receipt["blockNumber"].is_u64());
    assert!(receipt["txId"].is_string());

    assert_error(api.post("/api/login", None, json!({"subjectId": "asha", "password": "nope"})), 401, "DENIED");
    let citizen = api.login("asha", "pw-asha");
    let (_, docs) = api.get("/api/citizen/documents", Some(&citizen));
    assert!(docs["passport"].is_null());
    assert_eq!(docs["pending"][0]["status"], "PENDING");

    let agent = api.login("passport-agent", "passport-pw");
    let (status, pending) = api.get("/api/agent/passport/pending", Some(&agent));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(pending[0]["userId"], "asha");
    assert_error(api.post("/api/agent/passport/asha/decision", Some(&citizen), json!({"decision": "APPROVE"})), 403, "FORBIDDEN_FUNCTION");
    let (status, decided) = api.post("/api/agent/passport/asha/decision", Some(&agent), json!({"decision": "APPROVE"}));
    assert_eq!(status, StatusCode::OK, "{decided}");
    let passport_id = decided["response"]["passportId"].as_str().unwrap().to_owned();

    let (status, applied) = api.post(
        "/api/citizen/visa-applications",
        Some(&citizen),
        json!({"passportId": passport_id, "country": "France", "visaType": "TOURIST", "durationDays": 90}),
    );
    assert_eq!(status, StatusCode::OK, "{applied}");
    let app = applied["response"]["applicationId"].as_str().unwrap().to_owned();

    let france = api.login("france-agent", "france-pw");
    let japan = api.login("japan-agent", "japan-pw");
    let (_, queue) = api.get("/api/agent/visa/pending", Some(&france));
    assert_eq!(queue[0]["applicationId"], app.as_str());
    assert_eq!(api.get("/api/agent/visa/pending", Some(&japan)).1, json!([]));
    assert_error(api.post(&format!("/api/agent/visa/{app}/verify"), Some(&japan), json!({})), 403, "FORBIDDEN");
    assert_error(api.post(&format!("/api/agent/visa/{app}/decision"), Some(&france), json!({"decision": "APPROVE"})), 409, "NOT_VERIFIED");
    let (status, verified) = api.post(&format!("/api/agent/visa/{app}/verify"), Some(&france), json!({}));
    assert_eq!(status, StatusCode::OK, "{verified}");
    assert_eq!(verified["response"]["result"], "VERIFIED");
    let (status, _) = api.post(&format!("/api/agent/visa/{app}/decision"), Some(&france), json!({"decision": "APPROVE"}));
    assert_eq!(status, StatusCode::OK);

    let (_, docs) = api.get("/api/citizen/documents", Some(&citizen));
    assert_eq!(docs["passport"]["passportId"], passport_id.as_str());
    assert_eq!(docs["visas"][0]["visaIssueDate"], "2021-01-01");
    assert_eq!(docs["visas"][0]["visaExpireDate"], "2021-04-01");
    assert_eq!(docs["pending"], json!([]));

    let admin = api.login("admin", "admin-pw");
    let (status, blocks) = api.get("/api/admin/blocks", Some(&admin));
    assert_eq!(status, StatusCode::OK);
    let blocks = blocks.as_array().unwrap();
    assert_eq!(blocks[0]["number"], 0);
    let (_, some) = api.get("/api/admin/blocks?from=1&to=2", Some(&admin));
    assert_eq!(some.as_array().unwrap()[..], blocks[1..=2]);
    assert_error(api.get(&format!("/api/admin/blocks?from=0&to={}", blocks.len()), Some(&admin)), 404, "OUT_OF_RANGE");
    assert_error(api.get("/api/admin/blocks?from=x", Some(&admin)), 400, "BAD_REQUEST");
    assert_error(api.get("/api/admin/blocks", Some(&citizen)), 403, "FORBIDDEN_FUNCTION");

    let (status, _) = api.post(
        "/api/admin/agents",
        Some(&admin),
        json!({"subjectId": "agent-2", "role": "PASSPORT_AGENT", "mspId": "PassportOfficeMSP", "password": "pw-2"}),
    );
    assert_eq!(status, StatusCode::OK);
    api.login("agent-2", "pw-2");
}

#[test]
fn request_errors() {
    let api = start(gateway(22));
    assert_error(api.get("/api/citizen/documents", None), 401, "UNAUTHENTICATED");
    assert_error(api.get("/api/citizen/documents", Some(&"0".repeat(64))), 401, "UNAUTHENTICATED");
    assert_error(api.post("/api/login", None, json!({"subjectId": "a"})), 400, "BAD_REQUEST");
    let (status, body) = api.send(
        api.client.post(format!("{}/api/login", api.base)).header("content-type", "application/json").body("{"),
        None,
    );
    assert_error((status, body), 400, "BAD_REQUEST");
    assert_error(api.get("/api/nowhere", None), 404, "NOT_FOUND");
    assert_error(
        api.post("/api/citizen/passport-applications", None, application("bad", 12, "pw")),
        400,
        "VALIDATION",
    );
    api.post("/api/citizen/passport-applications", None, application("asha", 123456789012, "pw"));
    assert_error(
        api.post("/api/citizen/passport-applications", None, application("asha", 123456789012, "pw")),
        409,
        "DUPLICATE_APPLICATION",
    );
}

#[test]
fn expired_token_is_rejected() {
    let config = GatewayConfig {
        session_ttl: Duration::from_secs(120),
        ..GatewayConfig::default()
    };
    let (g, clock) = gateway_with(23, config);
    let api = start(g);
    let agent = api.login("passport-agent", "passport-pw");
    assert_eq!(api.get("/api/agent/passport/pending", Some(&agent)).0, StatusCode::OK);
    clock.advance(Duration::from_secs(121));
    assert_error(api.get("/api/agent/passport/pending", Some(&agent)), 401, "SESSION_EXPIRED");
}

#[test]
fn outage_is_reported_retryable() {
    let g = gateway(24);
    let network = Arc::clone(g.network());
    let api = start(g);
    network.set_orderer_online(false);
    let got = api.post("/api/citizen/passport-applications", None, application("asha", 123456789012, "pw"));
    assert_error(got.clone(), 503, "LEDGER_UNAVAILABLE");
    assert_eq!(got.1["retryable"], true);
}

#[test]
fn concurrent_decisions_yield_one_success() {
    let g = gateway(25);
    let api = Arc::new(start(g));
    api.post("/api/citizen/passport-applications", None, application("asha", 123456789012, "pw"));
    let agent = api.login("passport-agent", "passport-pw");
    let tabs: Vec<_> = (0..2)
        .map(|_| {
            let api = Arc::clone(&api);
            let agent = agent.clone();
            thread::spawn(move || api.post("/api/agent/passport/asha/decision", Some(&agent), json!({"decision": "APPROVE"})))
        })
        .collect();
    let results: Vec<(StatusCode, Value)> = tabs.into_iter().map(|t| t.join().unwrap()).collect();
    let ok = results.iter().filter(|(s, _)| *s == StatusCode::OK).count();
    assert_eq!(ok, 1, "{results:?}");
    let failed = results.iter().find(|(s, _)| *s != StatusCode::OK).unwrap();
    assert!(["NOT_FOUND", "MVCC_CONFLICT", "ALREADY_HAS_PASSPORT"].contains(&failed.1["code"].as_str().unwrap()), "{failed:?}");
}
