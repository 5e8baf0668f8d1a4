//! Signature policies: `OR(...)`/`AND(...)` trees over `'MSP.role'` principals.
//!
//! ```text
//! POLICY    := FN '(' ARG (',' ARG)* ')'
//! FN        := 'OR' | 'AND'
//! ARG       := '\'' MSPID '.' ROLE '\'' | POLICY
//! ```
//!
//! Whitespace between tokens is ignored. Policies serialize as their text form.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Certificate, Role};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Principal {
    pub msp_id: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SignaturePolicy {
    Or(Vec<SignaturePolicy>),
    And(Vec<SignaturePolicy>),
    Principal(Principal),
}

impl SignaturePolicy {
    pub fn principal(msp_id: &str, role: Role) -> Self {
        SignaturePolicy::Principal(Principal {
            msp_id: msp_id.to_owned(),
            role,
        })
    }

    /// Every MSP named by a leaf of this tree.
    pub fn msp_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_msps(&mut out);
        out
    }

    fn collect_msps<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            SignaturePolicy::Principal(p) => out.push(&p.msp_id),
            SignaturePolicy::Or(children) | SignaturePolicy::And(children) => {
                for c in children {
                    c.collect_msps(out);
                }
            }
        }
    }
}

impl fmt::Display for SignaturePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, children) = match self {
            SignaturePolicy::Principal(p) => return write!(f, "'{}.{}'", p.msp_id, p.role),
            SignaturePolicy::Or(c) => ("OR", c),
            SignaturePolicy::And(c) => ("AND", c),
        };
        write!(f, "{name}(")?;
        for (i, c) in children.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("POLICY_SYNTAX at {position}: {message}")]
pub struct PolicySyntaxError {
    /// Character offset of the first offending character.
    pub position: usize,
    pub message: String,
}

impl PolicySyntaxError {
    pub fn code(&self) -> &'static str {
        "POLICY_SYNTAX"
    }
}

pub fn parse_policy(text: &str) -> Result<SignaturePolicy, PolicySyntaxError> {
    let mut parser = Parser {
        chars: text.chars().collect(),
        pos: 0,
    };
    let policy = parser.policy()?;
    parser.skip_ws();
    if parser.pos < parser.chars.len() {
        return Err(parser.error("trailing characters after policy"));
    }
    Ok(policy)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: &str) -> PolicySyntaxError {
        PolicySyntaxError {
            position: self.pos,
            message: message.to_owned(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, want: char) -> Result<(), PolicySyntaxError> {
        self.skip_ws();
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{want}'")))
        }
    }

    fn policy(&mut self) -> Result<SignaturePolicy, PolicySyntaxError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let is_and = match name.as_str() {
            "OR" => false,
            "AND" => true,
            _ => {
                self.pos = start;
                return Err(self.error("expected OR or AND"));
            }
        };
        self.expect('(')?;
        let mut children = vec![self.argument()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                    children.push(self.argument()?);
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.error("expected ',' or ')'")),
            }
        }
        Ok(if is_and {
            SignaturePolicy::And(children)
        } else {
            SignaturePolicy::Or(children)
        })
    }

    fn argument(&mut self) -> Result<SignaturePolicy, PolicySyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('\'') => self.principal(),
            Some(c) if c.is_ascii_alphabetic() => self.policy(),
            _ => Err(self.error("expected a quoted principal or nested policy")),
        }
    }

    fn principal(&mut self) -> Result<SignaturePolicy, PolicySyntaxError> {
        let open = self.pos;
        self.pos += 1;
        let start = self.pos;
        while self.peek().is_some_and(|c| c != '\'') {
            let c = self.peek().unwrap();
            if !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')) {
                return Err(self.error("invalid character in principal"));
            }
            self.pos += 1;
        }
        if self.peek().is_none() {
            self.pos = open;
            return Err(self.error("unterminated principal"));
        }
        let body: String = self.chars[start..self.pos].iter().collect();
        let Some(dot) = body.rfind('.') else {
            return Err(self.error("principal must be 'MSPID.role'"));
        };
        let (msp_id, role_text) = (&body[..dot], &body[dot + 1..]);
        if msp_id.is_empty() {
            return Err(PolicySyntaxError {
                position: start,
                message: "empty msp id".into(),
            });
        }
        let role = role_text.parse::<Role>().map_err(|_| PolicySyntaxError {
            position: start + dot + 1,
            message: format!("unknown role {role_text:?}"),
        })?;
        self.pos += 1;
        Ok(SignaturePolicy::principal(msp_id, role))
    }
}

impl FromStr for SignaturePolicy {
    type Err = PolicySyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_policy(s)
    }
}

impl Serialize for SignaturePolicy {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignaturePolicy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let policy = parse_policy(&text).map_err(serde::de::Error::custom)?;
        if policy.to_string() != text {
            return Err(serde::de::Error::custom("policy not in canonical form"));
        }
        Ok(policy)
    }
}

/// Whether the set of already-verified `signers` satisfies `policy`.
///
/// Admins of an MSP also count as its members.
pub fn evaluate_policy(policy: &SignaturePolicy, signers: &[Certificate]) -> bool {
    match policy {
        SignaturePolicy::Principal(p) => signers.iter().any(|c| {
            c.msp_id == p.msp_id
                && match p.role {
                    Role::Member => true,
                    Role::Admin => c.role == Role::Admin,
                }
        }),
        SignaturePolicy::Or(children) => children.iter().any(|c| evaluate_policy(c, signers)),
        SignaturePolicy::And(children) => children.iter().all(|c| evaluate_policy(c, signers)),
    }
}
