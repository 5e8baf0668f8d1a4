//! The citizen and agent demo walk-through, driven through the gateway.

use std::fmt;

use clap::ValueEnum;
use passchain_core::network::{Topology, TxReceipt};
use passchain_gateway::{Gateway, GatewayError, LoginForm, PassportForm, Session, VisaForm};
use serde_json::{json, Value};

pub const DEMO_USER: &str = "asha";
pub const DEMO_AADHAAR: u64 = 123456789012;
pub const DEMO_PASSWORD: &str = "asha-demo-pw";
pub const DEMO_COUNTRY: &str = "France";
pub const DEMO_VISA_DAYS: u32 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    PaperDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "UPPER")]
pub enum Decision {
    Approve,
    Reject,
}

impl Decision {
    fn as_str(self) -> &'static str {
        match self {
            Decision::Approve => "APPROVE",
            Decision::Reject => "REJECT",
        }
    }
}

/// One line of the transcript: a committed transaction or a read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub name: &'static str,
    pub receipt: Option<TxReceipt>,
    pub detail: String,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<22}", self.name)?;
        if let Some(r) = &self.receipt {
            let block = r.block_number.map(|b| b.to_string()).unwrap_or_else(|| "-".into());
            write!(f, " tx={} block={block} {}", r.tx_id, r.validity)?;
        }
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("step {step}: {error}")]
pub struct StepError {
    pub step: &'static str,
    pub error: GatewayError,
}

fn unexpected(what: impl Into<String>) -> GatewayError {
    GatewayError::new("UNEXPECTED", what)
}

/// Runs steps in order, reporting each as it completes.
struct Driver<'a> {
    gateway: &'a Gateway,
    steps: Vec<Step>,
    report: &'a mut dyn FnMut(&Step),
}

impl Driver<'_> {
    fn record(&mut self, step: Step) {
        (self.report)(&step);
        self.steps.push(step);
    }

    fn tx(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&Gateway) -> Result<TxReceipt, GatewayError>,
    ) -> Result<TxReceipt, StepError> {
        let receipt = f(self.gateway).map_err(|error| StepError { step: name, error })?;
        if !receipt.is_valid() {
            let error = GatewayError::new(&receipt.validity, format!("tx {} not committed", receipt.tx_id));
            return Err(StepError { step: name, error });
        }
        self.record(Step {
            name,
            receipt: Some(receipt.clone()),
            detail: String::new(),
        });
        Ok(receipt)
    }

    fn read<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce(&Gateway) -> Result<(T, String), GatewayError>,
    ) -> Result<T, StepError> {
        let (value, detail) = f(self.gateway).map_err(|error| StepError { step: name, error })?;
        self.record(Step {
            name,
            receipt: None,
            detail,
        });
        Ok(value)
    }
}

fn login(g: &Gateway, subject: &str, password: &str) -> Result<(std::sync::Arc<Session>, String), GatewayError> {
    let r = g.login(&LoginForm {
        subject_id: subject.into(),
        password: password.into(),
    })?;
    let detail = format!("{} as {} ({})", r.subject_id, r.role, r.msp_id);
    Ok((g.session(&r.token)?, detail))
}

fn text<'v>(v: &'v Value, field: &str) -> Result<&'v str, GatewayError> {
    v[field].as_str().ok_or_else(|| unexpected(format!("missing {field} in {v}")))
}

pub fn demo_application() -> PassportForm {
    serde_json::from_value(json!({
        "userId": DEMO_USER,
        "name": "Asha Rao",
        "email": "asha@example.in",
        "phoneNumber": 9876543210u64,
        "address": "12 MG Road, Bengaluru",
        "aadhaarNumber": DEMO_AADHAAR,
        "password": DEMO_PASSWORD,
    }))
    .expect("demo application is well-formed")
}

/// Citizen applies, the passport agent reviews, and on approval the
/// citizen applies for a visa that the visa office verifies and approves.
pub fn paper_demo(
    gateway: &Gateway,
    topology: &Topology,
    decision: Decision,
    report: &mut dyn FnMut(&Step),
) -> Result<Vec<Step>, StepError> {
    let mut d = Driver {
        gateway,
        steps: Vec::new(),
        report,
    };
    let passport_agent = &topology.passport_office.agent;
    let visa_office = topology
        .visa_offices
        .iter()
        .find(|v| v.country == DEMO_COUNTRY)
        .unwrap_or(&topology.visa_offices[0]);

    d.tx("apply-passport", |g| g.apply_passport(&demo_application()))?;
    let agent = d.read("passport-agent-login", |g| {
        login(g, &passport_agent.subject_id, &passport_agent.password)
    })?;
    d.read("list-pending-passports", |g| {
        let pending = g.pending_passports(&agent)?;
        let rows = pending.as_array().map(Vec::len).unwrap_or(0);
        if !pending.as_array().is_some_and(|p| p.iter().any(|a| a["userId"] == DEMO_USER)) {
            return Err(unexpected(format!("{DEMO_USER} not in pending list {pending}")));
        }
        Ok(((), format!("{rows} pending")))
    })?;
    let review = d.tx("review-passport", |g| g.decide_passport(&agent, DEMO_USER, decision.as_str()))?;
    let citizen = d.read("citizen-login", |g| login(g, DEMO_USER, DEMO_PASSWORD))?;

    if decision == Decision::Reject {
        d.read("check-rejection", |g| {
            let docs = g.documents(&citizen)?;
            if !docs["passport"].is_null() || docs["pending"] != json!([]) {
                return Err(unexpected(format!("rejected application left {docs}")));
            }
            Ok(((), "no passport, no pending application".into()))
        })?;
        return Ok(d.steps);
    }

    let passport_id = d.read("query-passport", |g| {
        let docs = g.documents(&citizen)?;
        let id = text(&docs["passport"], "passportId")?.to_owned();
        if Some(id.as_str()) != review.response["passportId"].as_str() {
            return Err(unexpected(format!("documents show {id}, review issued {}", review.response)));
        }
        let detail = format!("passportId={id} issueDate={}", text(&docs["passport"], "issueDate")?);
        Ok((id, detail))
    })?;
    let visa = VisaForm {
        passport_id: passport_id.clone(),
        country: visa_office.country.clone(),
        visa_type: "TOURIST".into(),
        duration_days: DEMO_VISA_DAYS,
    };
    let applied = d.tx("apply-visa", |g| g.apply_visa(&citizen, &visa))?;
    let application = text(&applied.response, "applicationId")
        .map_err(|error| StepError {
            step: "apply-visa",
            error,
        })?
        .to_owned();
    let visa_agent = d.read("visa-agent-login", |g| {
        login(g, &visa_office.agent.subject_id, &visa_office.agent.password)
    })?;
    d.read("list-pending-visas", |g| {
        let pending = g.pending_visas(&visa_agent)?;
        if !pending.as_array().is_some_and(|p| p.iter().any(|a| a["applicationId"] == application.as_str())) {
            return Err(unexpected(format!("{application} not in pending list {pending}")));
        }
        Ok(((), format!("{application} pending for {}", visa_office.country)))
    })?;
    d.tx("verify-visa", |g| g.verify_visa(&visa_agent, &application))?;
    d.tx("review-visa", |g| g.decide_visa(&visa_agent, &application, "APPROVE"))?;
    d.read("query-visa", |g| {
        let docs = g.documents(&citizen)?;
        let visa = &docs["visas"][0];
        let detail = format!(
            "visaId={} {} {}..{}",
            text(visa, "visaId")?,
            text(visa, "country")?,
            text(visa, "visaIssueDate")?,
            text(visa, "visaExpireDate")?
        );
        Ok(((), detail))
    })?;
    Ok(d.steps)
}
