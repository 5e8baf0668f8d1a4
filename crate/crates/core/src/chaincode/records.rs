use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::hex_bytes;
use crate::digest::Digest;
use crate::time::Timestamp;

/// Application-level role bound to a credential.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TravelRole {
    Citizen,
    PassportAgent,
    VisaAgent(String),
    ChannelAdmin,
}

impl TravelRole {
    /// Role name without the country qualifier.
    pub fn kind(&self) -> &'static str {
        match self {
            TravelRole::Citizen => "CITIZEN",
            TravelRole::PassportAgent => "PASSPORT_AGENT",
            TravelRole::VisaAgent(_) => "VISA_AGENT",
            TravelRole::ChannelAdmin => "CHANNEL_ADMIN",
        }
    }
}

impl fmt::Display for TravelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TravelRole::VisaAgent(country) => write!(f, "VISA_AGENT:{country}"),
            other => f.write_str(other.kind()),
        }
    }
}

impl FromStr for TravelRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "CITIZEN" => Ok(TravelRole::Citizen),
            "PASSPORT_AGENT" => Ok(TravelRole::PassportAgent),
            "CHANNEL_ADMIN" => Ok(TravelRole::ChannelAdmin),
            _ => match s.strip_prefix("VISA_AGENT:") {
                Some(country) if valid_country(country) => Ok(TravelRole::VisaAgent(country.into())),
                _ => Err(format!("unknown role {s:?}")),
            },
        }
    }
}

impl Serialize for TravelRole {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TravelRole {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Country names are ASCII letters, spaces and hyphens.
pub(crate) fn valid_country(country: &str) -> bool {
    !country.is_empty()
        && country.len() <= 64
        && country
            .chars()
            .all(|c| c.is_ascii_alphabetic() || c == ' ' || c == '-')
        && !country.starts_with(' ')
        && !country.ends_with(' ')
}

/// Stored at `CRED_<subjectId>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CredentialRecord {
    pub subject_id: String,
    pub role: TravelRole,
    /// MSP whose certificates may act for this subject.
    pub msp_id: String,
    #[serde(with = "hex_bytes")]
    pub salt: Vec<u8>,
    pub password_digest: Digest,
}

/// Stored at `CITIZEN_<userId>`; links a citizen login to their Aadhaar
/// number, and through it to their passport.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CitizenRecord {
    pub user_id: String,
    pub aadhaar_number: u64,
}

/// Argument of `applyPassport`. The gateway salts and digests the
/// password before building this.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PassportApplicationRequest {
    pub user_id: String,
    pub name: String,
    pub email: String,
    pub phone_number: u64,
    pub address: String,
    pub aadhaar_number: u64,
    #[serde(with = "hex_bytes")]
    pub salt: Vec<u8>,
    pub password_digest: Digest,
}

/// Stored at `PASSAPP_<userId>` until decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UserApplication {
    pub user_id: String,
    pub name: String,
    pub email: String,
    pub phone_number: u64,
    pub address: String,
    pub aadhaar_number: u64,
    pub status: String,
    pub submitted_at: Timestamp,
}

/// Stored at `PASSPORT_<passportId>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PassportRecord {
    pub passport_id: String,
    pub name: String,
    pub email: String,
    pub phone_number: u64,
    pub address: String,
    pub aadhaar_number: u64,
    pub issue_date: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VisaApplicationStatus {
    Pending,
    Verified,
}

/// Stored at `VISAAPP_<applicationId>` until decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VisaApplication {
    pub application_id: String,
    pub passport_id: String,
    pub country: String,
    pub visa_type: String,
    pub duration_days: u32,
    pub status: VisaApplicationStatus,
    pub submitted_at: Timestamp,
}

/// Stored at `VISA_<visaId>`. There is deliberately no phone number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct VisaRecord {
    pub visa_id: String,
    pub country: String,
    pub visa_type: String,
    pub passport_id: String,
    pub name: String,
    pub email: String,
    pub address: String,
    pub aadhaar_number: u64,
    pub visa_issue_date: NaiveDate,
    pub visa_expire_date: NaiveDate,
}

/// An undecided application as shown to its citizen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PendingStatus {
    pub kind: String,
    pub application_id: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
}

/// Response of `getDocuments`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Documents {
    pub passport: Option<PassportRecord>,
    pub visas: Vec<VisaRecord>,
    pub pending: Vec<PendingStatus>,
}
