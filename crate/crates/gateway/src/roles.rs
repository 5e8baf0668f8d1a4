//! Which caller kinds may reach which contract functions.

use std::fmt;

use passchain_core::chaincode::TravelRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Caller {
    Anonymous,
    Citizen,
    PassportAgent,
    VisaAgent,
    ChannelAdmin,
}

pub const CALLERS: [Caller; 5] = [
    Caller::Anonymous,
    Caller::Citizen,
    Caller::PassportAgent,
    Caller::VisaAgent,
    Caller::ChannelAdmin,
];

/// Anything not listed here is refused before a proposal is built.
pub const ROLE_TABLE: [(Caller, &[&str]); 5] = [
    (Caller::Anonymous, &["applyPassport", "authenticate"]),
    (Caller::Citizen, &["applyVisa", "getDocuments"]),
    (Caller::PassportAgent, &["listPending", "reviewPassport", "getPassport"]),
    (Caller::VisaAgent, &["listPending", "verifyVisa", "reviewVisa", "getPassport"]),
    (Caller::ChannelAdmin, &["registerAgent"]),
];

pub fn permitted(caller: Caller, function: &str) -> bool {
    ROLE_TABLE
        .iter()
        .any(|(c, functions)| *c == caller && functions.contains(&function))
}

impl From<&TravelRole> for Caller {
    fn from(role: &TravelRole) -> Self {
        match role {
            TravelRole::Citizen => Caller::Citizen,
            TravelRole::PassportAgent => Caller::PassportAgent,
            TravelRole::VisaAgent(_) => Caller::VisaAgent,
            TravelRole::ChannelAdmin => Caller::ChannelAdmin,
        }
    }
}

impl fmt::Display for Caller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Caller::Anonymous => "ANONYMOUS",
            Caller::Citizen => "CITIZEN",
            Caller::PassportAgent => "PASSPORT_AGENT",
            Caller::VisaAgent => "VISA_AGENT",
            Caller::ChannelAdmin => "CHANNEL_ADMIN",
        })
    }
}
