use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::chaincode::valid_country;
use crate::channel::{DEFAULT_BATCH_MAX_COUNT, DEFAULT_BATCH_TIMEOUT};

use super::NetworkError;

/// A login created at bootstrap. The password is only ever held in memory.
#[derive(Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountSpec {
    pub subject_id: String,
    pub password: String,
}

impl std::fmt::Debug for AccountSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AccountSpec")
            .field("subject_id", &self.subject_id)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrdererOrg {
    pub msp_id: String,
    /// Registered as CHANNEL_ADMIN.
    pub admin: AccountSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassportOffice {
    pub msp_id: String,
    pub agent: AccountSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisaOffice {
    pub msp_id: String,
    pub country: String,
    pub agent: AccountSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default = "default_max_count")]
    pub max_count: u32,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_max_count() -> u32 {
    DEFAULT_BATCH_MAX_COUNT
}

fn default_timeout_ms() -> u64 {
    DEFAULT_BATCH_TIMEOUT.as_millis() as u64
}

impl Default for BatchSpec {
    fn default() -> Self {
        BatchSpec {
            max_count: default_max_count(),
            timeout_ms: default_timeout_ms(),
        }
    }
}

/// The network described by a topology file (TOML).
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub channel_id: String,
    pub orderer: OrdererOrg,
    pub passport_office: PassportOffice,
    pub visa_offices: Vec<VisaOffice>,
    #[serde(default)]
    pub batch: BatchSpec,
    /// Used when no data directory is given on the command line.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

fn invalid(message: impl Into<String>) -> NetworkError {
    NetworkError::Topology(message.into())
}

fn valid_msp_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

fn valid_subject(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '@' | '-'))
}

/// Node identities created by bootstrap; accounts may not reuse them.
const NODE_SUBJECTS: [&str; 4] = ["ca", "peer0", "orderer", "gateway"];

impl Topology {
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        let topology: Topology = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        topology.validate()?;
        Ok(topology)
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Topology::parse(&text)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if !valid_msp_id(&self.channel_id) {
            return Err(invalid(format!("bad channel_id {:?}", self.channel_id)));
        }
        if self.visa_offices.is_empty() {
            return Err(invalid("at least one visa office is required"));
        }
        let mut msps = HashSet::new();
        for msp in self.msp_ids() {
            if !valid_msp_id(msp) {
                return Err(invalid(format!("bad msp_id {msp:?}")));
            }
            if !msps.insert(msp) {
                return Err(invalid(format!("duplicate msp_id {msp}")));
            }
        }
        let mut countries = HashSet::new();
        for office in &self.visa_offices {
            if !valid_country(&office.country) {
                return Err(invalid(format!("bad country {:?}", office.country)));
            }
            if !countries.insert(office.country.as_str()) {
                return Err(invalid(format!("duplicate country code {}", office.country)));
            }
        }
        let mut subjects = HashSet::new();
        for account in self.accounts() {
            if !valid_subject(&account.subject_id) || NODE_SUBJECTS.contains(&account.subject_id.as_str()) {
                return Err(invalid(format!("bad subject_id {:?}", account.subject_id)));
            }
            if !subjects.insert(account.subject_id.as_str()) {
                return Err(invalid(format!("duplicate subject_id {}", account.subject_id)));
            }
            if account.password.is_empty() {
                return Err(invalid(format!("empty password for {}", account.subject_id)));
            }
        }
        if self.batch.max_count < 1 || self.batch.timeout_ms == 0 {
            return Err(invalid("batch.max_count and batch.timeout_ms must be positive"));
        }
        Ok(())
    }

    /// Orderer, passport office, then visa offices in file order.
    pub fn msp_ids(&self) -> Vec<&str> {
        let mut ids = vec![self.orderer.msp_id.as_str(), self.passport_office.msp_id.as_str()];
        ids.extend(self.visa_offices.iter().map(|v| v.msp_id.as_str()));
        ids
    }

    fn accounts(&self) -> Vec<&AccountSpec> {
        let mut accounts = vec![&self.orderer.admin, &self.passport_office.agent];
        accounts.extend(self.visa_offices.iter().map(|v| &v.agent));
        accounts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
channel_id = "travel"
[orderer]
msp_id = "OrdererMSP"
admin = { subject_id = "admin", password = "pw-admin" }
[passport_office]
msp_id = "PassportOfficeMSP"
agent = { subject_id = "pagent", password = "pw-p" }
[[visa_offices]]
msp_id = "FranceVisaMSP"
country = "France"
agent = { subject_id = "fagent", password = "pw-f" }
"#;

    #[test]
    fn parses_with_default_batch() {
        let t = Topology::parse(BASE).unwrap();
        assert_eq!(t.batch, BatchSpec::default());
        assert_eq!(t.msp_ids(), ["OrdererMSP", "PassportOfficeMSP", "FranceVisaMSP"]);
    }

    #[test]
    fn duplicate_country_rejected() {
        let text = format!(
            "{BASE}[[visa_offices]]\nmsp_id = \"OtherMSP\"\ncountry = \"France\"\nagent = {{ subject_id = \"o\", password = \"x\" }}\n"
        );
        let e = Topology::parse(&text).unwrap_err();
        assert_eq!(e.code(), "TOPOLOGY_INVALID");
        assert!(e.to_string().contains("duplicate country"));
    }

    #[test]
    fn no_visa_office_rejected() {
        let head = BASE.split("[[visa_offices]]").next().unwrap();
        let text = head.replacen("channel_id = \"travel\"\n", "channel_id = \"travel\"\nvisa_offices = []\n", 1);
        let e = Topology::parse(&text).unwrap_err();
        assert!(e.to_string().contains("at least one visa office"), "{e}");
    }

    #[test]
    fn debug_hides_passwords() {
        let t = Topology::parse(BASE).unwrap();
        assert!(!format!("{t:?}").contains("pw-admin"));
    }

    #[test]
    fn node_subject_names_reserved() {
        let text = BASE.replace("subject_id = \"pagent\"", "subject_id = \"peer0\"");
        assert_eq!(Topology::parse(&text).unwrap_err().code(), "TOPOLOGY_INVALID");
    }
}
