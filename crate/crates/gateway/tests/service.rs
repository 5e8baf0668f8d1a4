mod common;

use std::time::Duration;

use common::*;
use passchain_core::chaincode::FUNCTIONS;
use passchain_core::ledger::ValidationCode;
use passchain_gateway::{permitted, Caller, Gateway, GatewayConfig, LoginForm, Session, VisaForm, CALLERS};

fn form(subject: &str, password: &str) -> LoginForm {
    LoginForm {
        subject_id: subject.into(),
        password: password.into(),
    }
}

#[test]
fn citizen_login_round_trip() {
    let g = gateway(1);
    let r = g.apply_passport(&passport_form("asha", 123456789012, "secret-1")).unwrap();
    assert_eq!(r.validity, "VALID");
    let login = g.login(&form("asha", "secret-1")).unwrap();
    assert_eq!(login.role.to_string(), "CITIZEN");
    assert_eq!(login.msp_id, "PassportOfficeMSP");
    assert_eq!(login.token.len(), 64);
    let session = g.session(&login.token).unwrap();
    assert_eq!(session.subject_id, "asha");
    assert_eq!(session.identity().certificate().subject_id, "asha");

    let other = g.login(&form("asha", "secret-1")).unwrap();
    assert_ne!(other.token, login.token);
}

#[test]
fn wrong_password_creates_no_session() {
    let g = gateway(2);
    g.apply_passport(&passport_form("asha", 123456789012, "secret-1")).unwrap();
    let before = g.sessions().len();
    let wrong = g.login(&form("asha", "secret-2")).unwrap_err();
    let unknown = g.login(&form("nobody", "secret-2")).unwrap_err();
    assert_eq!(wrong.code, "DENIED");
    assert_eq!(wrong, unknown);
    assert_eq!(wrong.status(), 401);
    assert_eq!(g.sessions().len(), before);
}

#[test]
fn sessions_expire() {
    let config = GatewayConfig {
        session_ttl: Duration::from_secs(60),
        ..GatewayConfig::default()
    };
    let (g, clock) = gateway_with(3, config);
    let login = g.login(&form("passport-agent", "passport-pw")).unwrap();
    assert!(g.session(&login.token).is_ok());
    clock.advance(Duration::from_secs(61));
    let err = g.session(&login.token).unwrap_err();
    assert_eq!((err.code.as_str(), err.status()), ("SESSION_EXPIRED", 401));
    assert_eq!(g.session("ab".repeat(32).as_str()).unwrap_err().code, "UNAUTHENTICATED");
}

#[test]
fn admin_session_carries_admin_certificate() {
    let g = gateway(4);
    let admin = login(&g, "admin", "admin-pw");
    assert_eq!(admin.caller(), Caller::ChannelAdmin);
    assert_eq!(admin.identity().certificate().role, passchain_core::identity::Role::Admin);
    let agent = login(&g, "france-agent", "france-pw");
    assert_eq!(agent.identity().certificate().role, passchain_core::identity::Role::Member);
    assert_eq!(agent.msp_id, "FranceVisaMSP");
}

/// Everything a forbidden call must leave untouched.
fn fingerprint(g: &Gateway) -> (u64, usize, Vec<Vec<u8>>) {
    let net = g.network();
    let height = net.with_orderer(|o| o.height());
    let pending = net.with_orderer(|o| o.pending());
    let states = net
        .peer_msps()
        .iter()
        .map(|m| net.with_peer(m, |p| p.state().canonical_bytes()).unwrap())
        .collect();
    (height, pending, states)
}

#[test]
fn role_table_is_exhaustive() {
    let g = gateway(5);
    let w = world(&g, "asha");
    let sessions: Vec<(Caller, Option<&Session>)> = vec![
        (Caller::Anonymous, None),
        (Caller::Citizen, Some(&w.citizen)),
        (Caller::PassportAgent, Some(&w.passport_agent)),
        (Caller::VisaAgent, Some(&w.france_agent)),
        (Caller::ChannelAdmin, Some(&w.admin)),
    ];
    assert_eq!(sessions.len(), CALLERS.len());
    let mut functions: Vec<&str> = FUNCTIONS.to_vec();
    functions.push("dropTable");
    let mut denied = 0;
    for (caller, session) in &sessions {
        for f in &functions {
            let args = vec!["asha".to_string(), "APPROVE".to_string()];
            let before = fingerprint(&g);
            let invoked = g.invoke(*session, f, args.clone());
            let queried = g.query(*session, f, args);
            if permitted(*caller, f) {
                for code in [invoked.err().map(|e| e.code), queried.err().map(|e| e.code)].into_iter().flatten() {
                    assert_ne!(code, "FORBIDDEN_FUNCTION", "{caller} {f}");
                }
            } else {
                denied += 1;
                assert_eq!(invoked.unwrap_err().code, "FORBIDDEN_FUNCTION", "{caller} {f}");
                assert_eq!(queried.unwrap_err().code, "FORBIDDEN_FUNCTION", "{caller} {f}");
                assert_eq!(fingerprint(&g), before, "{caller} {f} touched the ledger");
            }
        }
    }
    // 5 callers x 11 functions, 12 pairs allowed
    assert_eq!(denied, 5 * 11 - 12);
    assert_eq!(w.citizen.caller(), Caller::Citizen);
    let err = g.decide_passport(&w.citizen, "asha", "APPROVE").unwrap_err();
    assert_eq!((err.code.as_str(), err.status()), ("FORBIDDEN_FUNCTION", 403));
}

#[test]
fn orderer_outage_is_retryable() {
    let g = gateway(6);
    g.network().set_orderer_online(false);
    let err = g.apply_passport(&passport_form("asha", 123456789012, "pw-1")).unwrap_err();
    assert_eq!(err.code, "LEDGER_UNAVAILABLE");
    assert!(err.retryable);
    assert_eq!(err.status(), 503);
    g.network().set_orderer_online(true);
    assert!(g.apply_passport(&passport_form("asha", 123456789012, "pw-1")).is_ok());
}

#[test]
fn query_mode_refuses_writes() {
    let g = gateway(7);
    let w = world(&g, "asha");
    let args = vec![w.passport_id.clone(), "France".into(), "TOURIST".into(), "90".into()];
    let err = g.query(Some(&w.citizen), "applyVisa", args).unwrap_err();
    assert_eq!((err.code.as_str(), err.status()), ("QUERY_WROTE", 400));
}

#[test]
fn visa_flow_and_receipt_honesty() {
    let g = gateway(8);
    let w = world(&g, "asha");
    let visa = VisaForm {
        passport_id: w.passport_id.clone(),
        country: "France".into(),
        visa_type: "TOURIST".into(),
        duration_days: 90,
    };
    let applied = g.apply_visa(&w.citizen, &visa).unwrap();
    let app = applied.response["applicationId"].as_str().unwrap().to_owned();
    let pending = g.pending_visas(&w.france_agent).unwrap();
    assert_eq!(pending[0]["applicationId"], app.as_str());
    let err = g.decide_visa(&w.france_agent, &app, "APPROVE").unwrap_err();
    assert_eq!((err.code.as_str(), err.status()), ("NOT_VERIFIED", 409));
    assert_eq!(g.verify_visa(&w.france_agent, &app).unwrap().response["result"], "VERIFIED");
    let approved = g.decide_visa(&w.france_agent, &app, "APPROVE").unwrap();

    for receipt in [&applied, &approved] {
        assert!(receipt.is_valid());
        let number = receipt.block_number.unwrap();
        let flag = g
            .network()
            .with_peer("PassportOfficeMSP", |p| {
                let block = p.ledger().chain().block(number).unwrap().clone();
                let i = block.data.iter().position(|t| t.payload.tx_id == receipt.tx_id).unwrap();
                block.metadata.validation_flags[i]
            })
            .unwrap();
        assert_eq!(flag, ValidationCode::Valid);
    }
    let docs = g.documents(&w.citizen).unwrap();
    assert_eq!(docs["visas"][0]["visaExpireDate"], "2021-04-01");
    assert_eq!(g.pending_visas(&w.passport_agent).unwrap_err().code, "FORBIDDEN_FUNCTION");
}

#[test]
fn admin_registers_an_agent() {
    let g = gateway(9);
    let admin = login(&g, "admin", "admin-pw");
    let agent = serde_json::from_value(serde_json::json!({
        "subjectId": "japan-agent-2",
        "role": "VISA_AGENT:Japan",
        "mspId": "JapanVisaMSP",
        "password": "fresh-pw",
    }))
    .unwrap();
    assert!(g.register_agent(&admin, &agent).unwrap().is_valid());
    let s = login(&g, "japan-agent-2", "fresh-pw");
    assert_eq!(s.role.to_string(), "VISA_AGENT:Japan");
    assert_eq!(g.pending_visas(&s).unwrap(), serde_json::json!([]));
    let err = g.register_agent(&admin, &agent).unwrap_err();
    assert_eq!(err.code, "DUPLICATE_SUBJECT");
}

#[test]
fn explorer_ranges() {
    let g = gateway(10);
    let w = world(&g, "asha");
    let height = g.network().with_orderer(|o| o.height());
    let all = g.explore_blocks(&w.admin, None, None).unwrap();
    assert_eq!(all.len() as u64, height);
    for pair in all.windows(2) {
        assert_eq!(pair[1].prev_hash, pair[0].header_hash);
        assert_eq!(pair[1].number, pair[0].number + 1);
    }
    assert!(all.iter().all(|s| s.tx_count == s.validation_flags.len()));
    assert_eq!(g.explore_blocks(&w.admin, Some(1), Some(2)).unwrap(), all[1..=2]);
    let err = g.explore_blocks(&w.admin, Some(0), Some(height)).unwrap_err();
    assert_eq!((err.code.as_str(), err.status()), ("OUT_OF_RANGE", 404));
    assert_eq!(g.explore_blocks(&w.admin, Some(3), Some(2)).unwrap_err().code, "OUT_OF_RANGE");
    assert_eq!(g.explore_blocks(&w.citizen, None, None).unwrap_err().code, "FORBIDDEN_FUNCTION");

    let status = g.ledger_status(&w.admin).unwrap();
    assert_eq!(status.len(), 5);
    assert!(status.iter().all(|s| s.height == height && s.state_digest == status[0].state_digest));
    assert_eq!(status[0].last_header_hash, Some(all.last().unwrap().header_hash));
    assert_eq!(g.ledger_status(&w.france_agent).unwrap_err().code, "FORBIDDEN_FUNCTION");
}

#[test]
fn forms_do_not_print_passwords() {
    let text = format!("{:?} {:?}", passport_form("asha", 123456789012, "hunter22"), form("asha", "hunter22"));
    assert!(!text.contains("hunter22"));
    assert!(text.contains("asha"));
}
