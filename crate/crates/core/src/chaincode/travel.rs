//! The travel-document contract: passport applications and issuance, visa
//! applications, cross-office verification and issuance, credentials.
//!
//! Reserved key prefixes:
//!
//! | key | value |
//! |-----|-------|
//! | `PASSAPP_<userId>` | [`UserApplication`], deleted when decided |
//! | `PASSPORT_<passportId>` | [`PassportRecord`] |
//! | `VISAAPP_<applicationId>` | [`VisaApplication`], deleted when decided |
//! | `VISA_<visaId>` | [`VisaRecord`] |
//! | `CRED_<subjectId>` | [`CredentialRecord`] |
//! | `CITIZEN_<userId>` | [`CitizenRecord`] |
//! | `AADHAAR_<number>` | passport id issued for that Aadhaar number |
//! | `HOLDER_<passportId>` | user id the passport was issued to |
//! | `SEQ_PASSPORT`, `SEQ_VISAAPP`, `SEQ_VISA` | last issued sequence number |

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::records::{valid_country, TravelRole};
use super::{
    Chaincode, ChaincodeError, ChaincodeStub, CitizenRecord, CredentialRecord, Documents,
    PassportApplicationRequest, PassportRecord, PendingStatus, UserApplication, VisaApplication,
    VisaApplicationStatus, VisaRecord,
};
use crate::codec;
use crate::digest::{compute_digest, Digest};
use crate::identity::evaluate_policy;

pub const TRAVEL_CHAINCODE: &str = "travel";
pub const TRAVEL_VERSION: &str = "1.0";
pub const VISA_TYPES: [&str; 4] = ["TOURIST", "BUSINESS", "STUDENT", "WORK"];
pub const SALT_LEN: usize = 16;
const MAX_DURATION_DAYS: u32 = 3650;

pub const INVOKE_FUNCTIONS: [&str; 6] = [
    "applyPassport",
    "reviewPassport",
    "applyVisa",
    "verifyVisa",
    "reviewVisa",
    "registerAgent",
];
pub const QUERY_FUNCTIONS: [&str; 4] = ["authenticate", "listPending", "getDocuments", "getPassport"];
pub const FUNCTIONS: [&str; 10] = [
    "applyPassport",
    "reviewPassport",
    "applyVisa",
    "verifyVisa",
    "reviewVisa",
    "registerAgent",
    "authenticate",
    "listPending",
    "getDocuments",
    "getPassport",
];

pub mod keys {
    pub const PASSAPP: &str = "PASSAPP_";
    pub const PASSPORT: &str = "PASSPORT_";
    pub const VISAAPP: &str = "VISAAPP_";
    pub const VISA: &str = "VISA_";
    pub const CRED: &str = "CRED_";
    pub const CITIZEN: &str = "CITIZEN_";
    pub const AADHAAR: &str = "AADHAAR_";
    pub const HOLDER: &str = "HOLDER_";
    pub const SEQ_PASSPORT: &str = "SEQ_PASSPORT";
    pub const SEQ_VISAAPP: &str = "SEQ_VISAAPP";
    pub const SEQ_VISA: &str = "SEQ_VISA";
}

/// Deployment parameters. Every peer must install the same values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TravelConfig {
    /// MSP that issues citizens' session certificates.
    pub citizen_msp_id: String,
    pub visa_types: Vec<String>,
}

impl TravelConfig {
    pub fn new(citizen_msp_id: impl Into<String>) -> Self {
        TravelConfig {
            citizen_msp_id: citizen_msp_id.into(),
            visa_types: VISA_TYPES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Digest stored for a password: `H(salt ‖ password)`.
pub fn password_digest(salt: &[u8], password: &str) -> Digest {
    let mut buf = Vec::with_capacity(salt.len() + password.len());
    buf.extend_from_slice(salt);
    buf.extend_from_slice(password.as_bytes());
    compute_digest(&buf)
}

#[derive(Debug, Clone)]
pub struct TravelContract {
    config: TravelConfig,
}

impl TravelContract {
    pub fn new(config: TravelConfig) -> Self {
        TravelContract { config }
    }

    pub fn config(&self) -> &TravelConfig {
        &self.config
    }
}

type Res = Result<Vec<u8>, ChaincodeError>;

fn err(code: &'static str, message: impl Into<String>) -> ChaincodeError {
    ChaincodeError::new(code, message)
}

fn respond<T: Serialize>(value: &T) -> Res {
    Ok(codec::encode_record(value))
}

fn arity<const N: usize>(args: &[String]) -> Result<&[String; N], ChaincodeError> {
    args.try_into()
        .map_err(|_| err("BAD_ARGUMENTS", format!("expected {N} arguments, got {}", args.len())))
}

/// Subject ids double as key suffixes, so their alphabet is restricted.
fn valid_subject(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '@' | '-'))
}

fn valid_email(email: &str) -> bool {
    let mut parts = email.split('@');
    matches!(
        (parts.next(), parts.next(), parts.next()),
        (Some(local), Some(domain), None) if !local.is_empty() && !domain.is_empty()
    )
}

fn valid_aadhaar(n: u64) -> bool {
    (100_000_000_000..1_000_000_000_000).contains(&n)
}

fn parse_decision(text: &str) -> Result<bool, ChaincodeError> {
    match text {
        "APPROVE" => Ok(true),
        "REJECT" => Ok(false),
        _ => Err(ChaincodeError::validation("decision")),
    }
}

fn digests_equal(a: &Digest, b: &Digest) -> bool {
    a.as_bytes()
        .iter()
        .zip(b.as_bytes())
        .fold(0u8, |acc, (x, y)| acc | (x ^ y))
        == 0
}

fn check_secret(salt: &[u8], digest: &Digest) -> Result<(), ChaincodeError> {
    if salt.len() != SALT_LEN {
        return Err(ChaincodeError::validation("salt"));
    }
    if digests_equal(digest, &password_digest(salt, "")) {
        return Err(ChaincodeError::validation("password"));
    }
    Ok(())
}

/// Role of the calling certificate, from its credential record.
fn caller_role(stub: &mut ChaincodeStub<'_>) -> Result<Option<TravelRole>, ChaincodeError> {
    let (subject, msp) = {
        let c = stub.caller();
        (c.subject_id.clone(), c.msp_id.clone())
    };
    let cred: Option<CredentialRecord> = stub.get_record(&format!("{}{subject}", keys::CRED))?;
    Ok(cred.filter(|c| c.msp_id == msp).map(|c| c.role))
}

fn require_passport_agent(stub: &mut ChaincodeStub<'_>) -> Result<(), ChaincodeError> {
    match caller_role(stub)? {
        Some(TravelRole::PassportAgent) => Ok(()),
        _ => Err(err("FORBIDDEN", "caller is not a passport agent")),
    }
}

fn require_visa_agent(stub: &mut ChaincodeStub<'_>) -> Result<String, ChaincodeError> {
    match caller_role(stub)? {
        Some(TravelRole::VisaAgent(country)) => Ok(country),
        _ => Err(err("FORBIDDEN", "caller is not a visa agent")),
    }
}

fn require_citizen(stub: &mut ChaincodeStub<'_>) -> Result<CitizenRecord, ChaincodeError> {
    if caller_role(stub)? != Some(TravelRole::Citizen) {
        return Err(err("FORBIDDEN", "caller is not a citizen"));
    }
    let subject = stub.caller().subject_id.clone();
    stub.get_record(&format!("{}{subject}", keys::CITIZEN))?
        .ok_or_else(|| err("FORBIDDEN", "caller has no citizen record"))
}

/// The passport issued to `citizen`, if any. Another user id registered
/// with the same Aadhaar number does not match.
fn held_passport(stub: &mut ChaincodeStub<'_>, citizen: &CitizenRecord) -> Result<Option<String>, ChaincodeError> {
    let indexed: Option<String> = stub.get_record(&format!("{}{}", keys::AADHAAR, citizen.aadhaar_number))?;
    let Some(pid) = indexed else { return Ok(None) };
    let holder: Option<String> = stub.get_record(&format!("{}{pid}", keys::HOLDER))?;
    Ok((holder.as_deref() == Some(citizen.user_id.as_str())).then_some(pid))
}

/// Reads, increments and writes a sequence counter.
fn next_id(stub: &mut ChaincodeStub<'_>, key: &str, prefix: &str) -> Result<String, ChaincodeError> {
    let current: u64 = stub.get_record(key)?.unwrap_or(0);
    let next = current + 1;
    stub.put_record(key, &next)?;
    Ok(format!("{prefix}{next:04}"))
}

fn decode_arg<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ChaincodeError> {
    codec::canonical_decode(text.as_bytes()).map_err(|e| err("BAD_ARGUMENTS", e.to_string()))
}

impl Chaincode for TravelContract {
    fn name(&self) -> &str {
        TRAVEL_CHAINCODE
    }

    fn version(&self) -> &str {
        TRAVEL_VERSION
    }

    fn invoke(&self, function: &str, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        match function {
            "applyPassport" => self.apply_passport(args, stub),
            "authenticate" => self.authenticate(args, stub),
            "listPending" => self.list_pending(args, stub),
            "reviewPassport" => self.review_passport(args, stub),
            "applyVisa" => self.apply_visa(args, stub),
            "verifyVisa" => self.verify_visa(args, stub),
            "reviewVisa" => self.review_visa(args, stub),
            "getDocuments" => self.get_documents(args, stub),
            "registerAgent" => self.register_agent(args, stub),
            "getPassport" => self.get_passport(args, stub),
            other => Err(err("UNKNOWN_FUNCTION", format!("no function {other:?}"))),
        }
    }
}

impl TravelContract {
    fn apply_passport(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [request] = arity::<1>(args)?;
        let req: PassportApplicationRequest = decode_arg(request)?;
        if !valid_subject(&req.user_id) {
            return Err(ChaincodeError::validation("userId"));
        }
        if req.name.trim().is_empty() {
            return Err(ChaincodeError::validation("name"));
        }
        if !valid_email(&req.email) {
            return Err(ChaincodeError::validation("email"));
        }
        if req.phone_number == 0 || req.phone_number > 999_999_999_999_999 {
            return Err(ChaincodeError::validation("phoneNumber"));
        }
        if req.address.trim().is_empty() {
            return Err(ChaincodeError::validation("address"));
        }
        if !valid_aadhaar(req.aadhaar_number) {
            return Err(ChaincodeError::validation("aadhaar"));
        }
        check_secret(&req.salt, &req.password_digest)?;

        if stub
            .get_state(&format!("{}{}", keys::AADHAAR, req.aadhaar_number))
            .is_some()
        {
            return Err(err("ALREADY_HAS_PASSPORT", "a passport exists for this Aadhaar number"));
        }
        let app_key = format!("{}{}", keys::PASSAPP, req.user_id);
        if stub.get_state(&app_key).is_some() {
            return Err(err("DUPLICATE_APPLICATION", format!("{} already has a pending application", req.user_id)));
        }
        let cred_key = format!("{}{}", keys::CRED, req.user_id);
        let citizen_key = format!("{}{}", keys::CITIZEN, req.user_id);
        let existing: Option<CredentialRecord> = stub.get_record(&cred_key)?;
        match existing {
            None => {
                stub.put_record(
                    &cred_key,
                    &CredentialRecord {
                        subject_id: req.user_id.clone(),
                        role: TravelRole::Citizen,
                        msp_id: self.config.citizen_msp_id.clone(),
                        salt: req.salt.clone(),
                        password_digest: req.password_digest,
                    },
                )?;
                stub.put_record(
                    &citizen_key,
                    &CitizenRecord {
                        user_id: req.user_id.clone(),
                        aadhaar_number: req.aadhaar_number,
                    },
                )?;
            }
            Some(cred) => {
                // a citizen re-applying after a rejection keeps their login
                let citizen: Option<CitizenRecord> = stub.get_record(&citizen_key)?;
                let same_person = cred.role == TravelRole::Citizen
                    && citizen.is_some_and(|c| c.aadhaar_number == req.aadhaar_number);
                if !same_person {
                    return Err(err("DUPLICATE_SUBJECT", format!("{} is taken", req.user_id)));
                }
            }
        }
        let app = UserApplication {
            user_id: req.user_id.clone(),
            name: req.name,
            email: req.email,
            phone_number: req.phone_number,
            address: req.address,
            aadhaar_number: req.aadhaar_number,
            status: "PENDING".into(),
            submitted_at: stub.timestamp(),
        };
        stub.put_record(&app_key, &app)?;
        respond(&json!({"applicationId": req.user_id, "status": "PENDING"}))
    }

    fn authenticate(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [subject, password] = arity::<2>(args)?;
        let denied = || err("DENIED", "invalid credentials");
        let cred: Option<CredentialRecord> = if valid_subject(subject) {
            stub.get_record(&format!("{}{subject}", keys::CRED))?
        } else {
            None
        };
        match cred {
            Some(cred) => {
                if digests_equal(&password_digest(&cred.salt, password), &cred.password_digest) {
                    respond(&json!({
                        "mspId": cred.msp_id,
                        "role": cred.role,
                        "subjectId": cred.subject_id,
                    }))
                } else {
                    Err(denied())
                }
            }
            None => {
                // same work as a wrong password
                let _ = password_digest(&[0u8; SALT_LEN], password);
                Err(denied())
            }
        }
    }

    fn list_pending(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        match args.first().map(String::as_str) {
            Some("PASSPORT") => {
                arity::<1>(args)?;
                require_passport_agent(stub)?;
                let mut apps: Vec<UserApplication> = stub
                    .scan_prefix(keys::PASSAPP)
                    .into_iter()
                    .map(|(k, v)| decode_record(&k, &v))
                    .collect::<Result<_, _>>()?;
                apps.retain(|a| a.status == "PENDING");
                apps.sort_by(|a, b| (a.submitted_at, &a.user_id).cmp(&(b.submitted_at, &b.user_id)));
                respond(&apps)
            }
            Some("VISA") => {
                let [_, country] = arity::<2>(args)?;
                let own = require_visa_agent(stub)?;
                if own != *country {
                    return Err(err("FORBIDDEN", format!("visa agent for {own} cannot list {country}")));
                }
                let mut apps: Vec<VisaApplication> = stub
                    .scan_prefix(keys::VISAAPP)
                    .into_iter()
                    .map(|(k, v)| decode_record(&k, &v))
                    .collect::<Result<_, _>>()?;
                apps.retain(|a| a.country == *country);
                apps.sort_by(|a, b| {
                    (a.submitted_at, &a.application_id).cmp(&(b.submitted_at, &b.application_id))
                });
                respond(&apps)
            }
            _ => Err(err(
                "BAD_ARGUMENTS",
                "expected [\"PASSPORT\"] or [\"VISA\", country]",
            )),
        }
    }

    fn review_passport(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [app_id, decision] = arity::<2>(args)?;
        require_passport_agent(stub)?;
        let approve = parse_decision(decision)?;
        let app_key = format!("{}{app_id}", keys::PASSAPP);
        let app: UserApplication = stub
            .get_record(&app_key)?
            .ok_or_else(|| err("NOT_FOUND", format!("no passport application {app_id}")))?;
        if !approve {
            stub.del_state(&app_key)?;
            return respond(&json!({"applicationId": app_id, "decision": "REJECTED"}));
        }
        let index_key = format!("{}{}", keys::AADHAAR, app.aadhaar_number);
        if stub.get_state(&index_key).is_some() {
            return Err(err("ALREADY_HAS_PASSPORT", "a passport exists for this Aadhaar number"));
        }
        let passport_id = next_id(stub, keys::SEQ_PASSPORT, "P")?;
        let passport = PassportRecord {
            passport_id: passport_id.clone(),
            name: app.name,
            email: app.email,
            phone_number: app.phone_number,
            address: app.address,
            aadhaar_number: app.aadhaar_number,
            issue_date: stub.timestamp().date(),
        };
        stub.put_record(&format!("{}{passport_id}", keys::PASSPORT), &passport)?;
        stub.put_record(&index_key, &passport_id)?;
        stub.put_record(&format!("{}{passport_id}", keys::HOLDER), &app.user_id)?;
        stub.del_state(&app_key)?;
        respond(&json!({
            "applicationId": app_id,
            "decision": "APPROVED",
            "passportId": passport_id,
        }))
    }

    fn apply_visa(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [passport_id, country, visa_type, duration] = arity::<4>(args)?;
        if !valid_country(country) {
            return Err(ChaincodeError::validation("country"));
        }
        if !self.config.visa_types.iter().any(|t| t == visa_type) {
            return Err(ChaincodeError::validation("visaType"));
        }
        let duration_days: u32 = match duration.parse() {
            Ok(d) if (1..=MAX_DURATION_DAYS).contains(&d) && !duration.starts_with('+') => d,
            _ => return Err(ChaincodeError::validation("duration")),
        };
        let citizen = require_citizen(stub)?;
        let passport: PassportRecord = stub
            .get_record(&format!("{}{passport_id}", keys::PASSPORT))?
            .ok_or_else(|| err("NO_PASSPORT", format!("no passport {passport_id}")))?;
        let holder: Option<String> = stub.get_record(&format!("{}{passport_id}", keys::HOLDER))?;
        if passport.aadhaar_number != citizen.aadhaar_number || holder.as_deref() != Some(citizen.user_id.as_str()) {
            return Err(err("FORBIDDEN", "passport belongs to another citizen"));
        }
        let duplicate = stub
            .scan_prefix(keys::VISAAPP)
            .into_iter()
            .map(|(k, v)| decode_record::<VisaApplication>(&k, &v))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .any(|a| a.passport_id == *passport_id && a.country == *country);
        if duplicate {
            return Err(err(
                "DUPLICATE_PENDING",
                format!("{passport_id} already has an open {country} application"),
            ));
        }
        let application_id = next_id(stub, keys::SEQ_VISAAPP, "VA")?;
        let app = VisaApplication {
            application_id: application_id.clone(),
            passport_id: passport_id.clone(),
            country: country.clone(),
            visa_type: visa_type.clone(),
            duration_days,
            status: VisaApplicationStatus::Pending,
            submitted_at: stub.timestamp(),
        };
        stub.put_record(&format!("{}{application_id}", keys::VISAAPP), &app)?;
        respond(&json!({"applicationId": application_id, "status": "PENDING"}))
    }

    /// Loads a visa application the calling agent is responsible for.
    fn agent_visa_application(
        &self,
        app_id: &str,
        stub: &mut ChaincodeStub<'_>,
    ) -> Result<VisaApplication, ChaincodeError> {
        let own = require_visa_agent(stub)?;
        let app: VisaApplication = stub
            .get_record(&format!("{}{app_id}", keys::VISAAPP))?
            .ok_or_else(|| err("NOT_FOUND", format!("no visa application {app_id}")))?;
        if app.country != own {
            return Err(err("FORBIDDEN", format!("visa agent for {own} cannot act on {}", app.country)));
        }
        Ok(app)
    }

    fn verify_visa(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [app_id] = arity::<1>(args)?;
        let mut app = self.agent_visa_application(app_id, stub)?;
        if app.status == VisaApplicationStatus::Verified {
            return respond(&json!({"applicationId": app_id, "result": "VERIFIED"}));
        }
        let passport: Option<PassportRecord> =
            stub.get_record(&format!("{}{}", keys::PASSPORT, app.passport_id))?;
        let live = match passport {
            Some(p) => {
                let indexed: Option<String> =
                    stub.get_record(&format!("{}{}", keys::AADHAAR, p.aadhaar_number))?;
                indexed.as_deref() == Some(app.passport_id.as_str())
            }
            None => false,
        };
        if !live {
            return respond(&json!({"applicationId": app_id, "result": "VERIFY_DENIED"}));
        }
        app.status = VisaApplicationStatus::Verified;
        stub.put_record(&format!("{}{app_id}", keys::VISAAPP), &app)?;
        respond(&json!({"applicationId": app_id, "result": "VERIFIED"}))
    }

    fn review_visa(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [app_id, decision] = arity::<2>(args)?;
        let app = self.agent_visa_application(app_id, stub)?;
        let approve = parse_decision(decision)?;
        let app_key = format!("{}{app_id}", keys::VISAAPP);
        if !approve {
            stub.del_state(&app_key)?;
            return respond(&json!({"applicationId": app_id, "decision": "REJECTED"}));
        }
        if app.status != VisaApplicationStatus::Verified {
            return Err(err("NOT_VERIFIED", format!("{app_id} has not been verified")));
        }
        let passport: PassportRecord = stub
            .get_record(&format!("{}{}", keys::PASSPORT, app.passport_id))?
            .ok_or_else(|| err("NO_PASSPORT", format!("no passport {}", app.passport_id)))?;
        let visa_id = next_id(stub, keys::SEQ_VISA, "V")?;
        let issue = stub.timestamp().date();
        let expire = issue + chrono::Days::new(u64::from(app.duration_days));
        let visa = VisaRecord {
            visa_id: visa_id.clone(),
            country: app.country,
            visa_type: app.visa_type,
            passport_id: passport.passport_id,
            name: passport.name,
            email: passport.email,
            address: passport.address,
            aadhaar_number: passport.aadhaar_number,
            visa_issue_date: issue,
            visa_expire_date: expire,
        };
        stub.put_record(&format!("{}{visa_id}", keys::VISA), &visa)?;
        stub.del_state(&app_key)?;
        respond(&json!({"applicationId": app_id, "decision": "APPROVED", "visaId": visa_id}))
    }

    fn get_documents(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [subject] = arity::<1>(args)?;
        if stub.caller().subject_id != *subject {
            return Err(err("FORBIDDEN", "citizens may only read their own documents"));
        }
        let citizen = require_citizen(stub)?;
        let passport_id = held_passport(stub, &citizen)?;
        let passport: Option<PassportRecord> = match &passport_id {
            Some(pid) => stub.get_record(&format!("{}{pid}", keys::PASSPORT))?,
            None => None,
        };
        let mut visas = Vec::new();
        let mut pending = Vec::new();
        if let Some(app) = stub.get_record::<UserApplication>(&format!("{}{subject}", keys::PASSAPP))? {
            pending.push(PendingStatus {
                kind: "PASSPORT".into(),
                application_id: app.user_id,
                status: app.status,
                country: None,
            });
        }
        if let Some(pid) = &passport_id {
            for (k, v) in stub.scan_prefix(keys::VISA) {
                let visa: VisaRecord = decode_record(&k, &v)?;
                if visa.passport_id == *pid {
                    visas.push(visa);
                }
            }
            for (k, v) in stub.scan_prefix(keys::VISAAPP) {
                let app: VisaApplication = decode_record(&k, &v)?;
                if app.passport_id == *pid {
                    pending.push(PendingStatus {
                        kind: "VISA".into(),
                        application_id: app.application_id,
                        status: match app.status {
                            VisaApplicationStatus::Pending => "PENDING".into(),
                            VisaApplicationStatus::Verified => "VERIFIED".into(),
                        },
                        country: Some(app.country),
                    });
                }
            }
        }
        respond(&Documents {
            passport,
            visas,
            pending,
        })
    }

    fn register_agent(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [subject, role, msp_id, salt_hex, digest_hex] = arity::<5>(args)?;
        let config = stub.channel_config()?;
        let caller = stub.caller().clone();
        if !evaluate_policy(&config.admins_policy, std::slice::from_ref(&caller)) {
            return Err(err("FORBIDDEN", "caller does not satisfy the admins policy"));
        }
        if !valid_subject(subject) {
            return Err(ChaincodeError::validation("subjectId"));
        }
        let role: TravelRole = role.parse().map_err(|_| ChaincodeError::validation("role"))?;
        if role == TravelRole::Citizen {
            return Err(ChaincodeError::validation("role"));
        }
        if config.msp(msp_id).is_none() {
            return Err(ChaincodeError::validation("mspId"));
        }
        let salt = codec::hex_bytes::decode_lower(salt_hex).map_err(|_| ChaincodeError::validation("salt"))?;
        let digest: Digest = digest_hex.parse().map_err(|_| ChaincodeError::validation("password"))?;
        check_secret(&salt, &digest)?;
        let cred_key = format!("{}{subject}", keys::CRED);
        if stub.get_state(&cred_key).is_some() {
            return Err(err("DUPLICATE_SUBJECT", format!("{subject} is already registered")));
        }
        stub.put_record(
            &cred_key,
            &CredentialRecord {
                subject_id: subject.clone(),
                role: role.clone(),
                msp_id: msp_id.clone(),
                salt,
                password_digest: digest,
            },
        )?;
        respond(&json!({"role": role, "subjectId": subject}))
    }

    fn get_passport(&self, args: &[String], stub: &mut ChaincodeStub<'_>) -> Res {
        let [passport_id] = arity::<1>(args)?;
        match caller_role(stub)? {
            Some(TravelRole::PassportAgent | TravelRole::VisaAgent(_)) => {}
            _ => return Err(err("FORBIDDEN", "caller is not an agent")),
        }
        let passport: PassportRecord = stub
            .get_record(&format!("{}{passport_id}", keys::PASSPORT))?
            .ok_or_else(|| err("NOT_FOUND", format!("no passport {passport_id}")))?;
        respond(&passport)
    }
}

fn decode_record<T: serde::de::DeserializeOwned>(key: &str, bytes: &[u8]) -> Result<T, ChaincodeError> {
    codec::canonical_decode(bytes).map_err(|e| err("CORRUPT_RECORD", format!("{key}: {e}")))
}

/// True iff `function` never writes.
pub fn is_query_function(function: &str) -> bool {
    QUERY_FUNCTIONS.contains(&function)
}
