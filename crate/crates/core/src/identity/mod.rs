//! Certificates, certificate authorities, membership service providers and
//! signatures.
//!
//! Signing uses Ed25519, which is deterministic: the same key and message
//! always give the same signature. Certificates are root-to-leaf only; each
//! MSP is anchored by one CA public key.

mod policy;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{self, hex_bytes};
use crate::time::Timestamp;

pub use policy::{evaluate_policy, parse_policy, PolicySyntaxError, Principal, SignaturePolicy};

/// Name of the platform signature scheme, recorded in channel configuration.
pub const SIGNATURE_SCHEME: &str = "Ed25519";

/// Default certificate lifetime.
pub const DEFAULT_VALIDITY: Duration = Duration::from_secs(365 * 24 * 60 * 60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Member,
    Admin,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Member => "member",
            Role::Admin => "admin",
        })
    }
}

impl FromStr for Role {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "member" => Ok(Role::Member),
            "admin" => Ok(Role::Admin),
            _ => Err(()),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublicKey(#[serde(with = "hex_bytes")] Vec<u8>);

impl PublicKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    fn verifying_key(&self) -> Option<VerifyingKey> {
        let bytes: [u8; 32] = self.0.as_slice().try_into().ok()?;
        VerifyingKey::from_bytes(&bytes).ok()
    }

    /// Verifies `sig` over `message`, rejecting malformed keys or signatures.
    pub fn verify(&self, message: &[u8], sig: &Signature) -> bool {
        let Some(key) = self.verifying_key() else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&sig.0) else {
            return false;
        };
        key.verify_strict(message, &sig).is_ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", hex::encode(&self.0))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Signature(#[serde(with = "hex_bytes")] Vec<u8>);

impl Signature {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Signature(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = hex::encode(&self.0);
        write!(f, "Signature({}..)", &hex[..hex.len().min(16)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub subject_id: String,
    pub msp_id: String,
    pub role: Role,
    pub public_key: PublicKey,
    pub issuer_msp_id: String,
    pub not_after: Timestamp,
    pub issuer_signature: Signature,
}

#[derive(Serialize)]
struct CertificateBody<'a> {
    subject_id: &'a str,
    msp_id: &'a str,
    role: Role,
    public_key: &'a PublicKey,
    issuer_msp_id: &'a str,
    not_after: Timestamp,
}

impl Certificate {
    /// Canonical bytes covered by the issuer signature.
    pub fn body_bytes(&self) -> Vec<u8> {
        codec::encode_record(&CertificateBody {
            subject_id: &self.subject_id,
            msp_id: &self.msp_id,
            role: self.role,
            public_key: &self.public_key,
            issuer_msp_id: &self.issuer_msp_id,
            not_after: self.not_after,
        })
    }

    /// `msp_id.subject_id`, used in logs and error messages.
    pub fn display_name(&self) -> String {
        format!("{}.{}", self.msp_id, self.subject_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MspConfig {
    pub msp_id: String,
    pub root_ca_public_key: PublicKey,
    pub admin_subject_ids: Vec<String>,
}

/// True iff `cert` was issued by `msp`'s root, names `msp`, and has not
/// expired at `now`.
pub fn verify_certificate(cert: &Certificate, msp: &MspConfig, now: Timestamp) -> bool {
    cert.msp_id == msp.msp_id
        && cert.issuer_msp_id == msp.msp_id
        && now <= cert.not_after
        && msp
            .root_ca_public_key
            .verify(&cert.body_bytes(), &cert.issuer_signature)
}

/// A certificate together with its private key. The key never enters the
/// ledger; see [`SigningIdentity::save`] for the on-disk form.
#[derive(Clone)]
pub struct SigningIdentity {
    certificate: Certificate,
    key: SigningKey,
}

impl fmt::Debug for SigningIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningIdentity")
            .field("certificate", &self.certificate.display_name())
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityFile {
    certificate: Certificate,
    #[serde(with = "hex_bytes")]
    private_key: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum IdentityError {
    #[error("WRONG_MSP: authority for {authority} cannot issue for {requested}")]
    WrongMsp { authority: String, requested: String },
    #[error("KEY_MISMATCH: private key does not match certificate")]
    KeyMismatch,
    #[error("identity file: {0}")]
    Io(#[from] std::io::Error),
    #[error("identity file: {0}")]
    Decode(#[from] codec::DecodeError),
}

impl SigningIdentity {
    pub fn new(certificate: Certificate, secret: [u8; 32]) -> Result<Self, IdentityError> {
        let key = SigningKey::from_bytes(&secret);
        if key.verifying_key().to_bytes().as_slice() != certificate.public_key.as_bytes() {
            return Err(IdentityError::KeyMismatch);
        }
        Ok(SigningIdentity { certificate, key })
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.key.sign(message).to_bytes().to_vec())
    }

    /// Writes the identity to `path` with owner-only permissions.
    pub fn save(&self, path: &Path) -> Result<(), IdentityError> {
        let file = IdentityFile {
            certificate: self.certificate.clone(),
            private_key: self.key.to_bytes().to_vec(),
        };
        write_private(path, &codec::encode_record(&file))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IdentityError> {
        let file: IdentityFile = codec::canonical_decode(&fs::read(path)?)?;
        let secret: [u8; 32] = file
            .private_key
            .as_slice()
            .try_into()
            .map_err(|_| IdentityError::KeyMismatch)?;
        SigningIdentity::new(file.certificate, secret)
    }
}

fn write_private(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut options = fs::OpenOptions::new();
    options.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        options.mode(0o600);
    }
    let mut file = options.open(path)?;
    file.write_all(bytes)?;
    file.sync_all()
}

/// Signs `message` with `identity`'s key.
pub fn sign(identity: &SigningIdentity, message: &[u8]) -> Signature {
    identity.sign(message)
}

/// True iff `sig` verifies over `message` under the certificate's key.
pub fn verify_signature(cert: &Certificate, message: &[u8], sig: &Signature) -> bool {
    cert.public_key.verify(message, sig)
}

pub fn generate_secret<R: Rng + ?Sized>(rng: &mut R) -> [u8; 32] {
    let mut secret = [0u8; 32];
    rng.fill_bytes(&mut secret);
    secret
}

pub fn public_key_for(secret: &[u8; 32]) -> PublicKey {
    PublicKey(SigningKey::from_bytes(secret).verifying_key().to_bytes().to_vec())
}

/// The root authority of one organization's MSP. Its own identity is a
/// self-issued admin certificate.
#[derive(Debug, Clone)]
pub struct CertificateAuthority {
    identity: SigningIdentity,
}

impl CertificateAuthority {
    pub fn generate<R: Rng + ?Sized>(msp_id: &str, rng: &mut R, not_after: Timestamp) -> Self {
        let secret = generate_secret(rng);
        let mut certificate = Certificate {
            subject_id: "ca".into(),
            msp_id: msp_id.into(),
            role: Role::Admin,
            public_key: public_key_for(&secret),
            issuer_msp_id: msp_id.into(),
            not_after,
            issuer_signature: Signature(Vec::new()),
        };
        let key = SigningKey::from_bytes(&secret);
        certificate.issuer_signature = Signature(key.sign(&certificate.body_bytes()).to_bytes().to_vec());
        CertificateAuthority {
            identity: SigningIdentity { certificate, key },
        }
    }

    pub fn from_identity(identity: SigningIdentity) -> Self {
        CertificateAuthority { identity }
    }

    pub fn identity(&self) -> &SigningIdentity {
        &self.identity
    }

    pub fn msp_id(&self) -> &str {
        &self.identity.certificate.msp_id
    }

    pub fn root_public_key(&self) -> &PublicKey {
        &self.identity.certificate.public_key
    }

    pub fn msp_config(&self, admin_subject_ids: Vec<String>) -> MspConfig {
        MspConfig {
            msp_id: self.msp_id().to_owned(),
            root_ca_public_key: self.root_public_key().clone(),
            admin_subject_ids,
        }
    }

    /// Issues a certificate binding `public_key` to `subject_id` in `msp_id`.
    pub fn issue(
        &self,
        subject_id: &str,
        msp_id: &str,
        role: Role,
        public_key: PublicKey,
        not_after: Timestamp,
    ) -> Result<Certificate, IdentityError> {
        if msp_id != self.msp_id() {
            return Err(IdentityError::WrongMsp {
                authority: self.msp_id().to_owned(),
                requested: msp_id.to_owned(),
            });
        }
        let mut cert = Certificate {
            subject_id: subject_id.to_owned(),
            msp_id: msp_id.to_owned(),
            role,
            public_key,
            issuer_msp_id: self.msp_id().to_owned(),
            not_after,
            issuer_signature: Signature(Vec::new()),
        };
        cert.issuer_signature = self.identity.sign(&cert.body_bytes());
        Ok(cert)
    }

    /// Generates a key pair and issues its certificate.
    pub fn enroll<R: Rng + ?Sized>(
        &self,
        subject_id: &str,
        role: Role,
        rng: &mut R,
        not_after: Timestamp,
    ) -> SigningIdentity {
        let secret = generate_secret(rng);
        let cert = self
            .issue(subject_id, &self.msp_id().to_owned(), role, public_key_for(&secret), not_after)
            .expect("authority issues for its own msp");
        SigningIdentity::new(cert, secret).expect("freshly generated key pair")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::ChaCha20Rng;
    use rand::SeedableRng;

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    fn setup() -> (CertificateAuthority, CertificateAuthority, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let until = ts("2030-01-01T00:00:00Z");
        let passport = CertificateAuthority::generate("PassportOfficeMSP", &mut rng, until);
        let visa = CertificateAuthority::generate("VisaOfficeMSP", &mut rng, until);
        (passport, visa, rng)
    }

    #[test]
    fn issued_certificate_verifies_under_root() {
        let (ca, _, mut rng) = setup();
        let agent = ca.enroll("agent-1", Role::Member, &mut rng, ts("2022-01-01T00:00:00Z"));
        let msp = ca.msp_config(vec![]);
        assert!(verify_certificate(agent.certificate(), &msp, ts("2021-06-01T00:00:00Z")));
    }

    #[test]
    fn wrong_msp_refused() {
        let (_, visa, mut rng) = setup();
        let secret = generate_secret(&mut rng);
        let err = visa
            .issue("agent-1", "PassportOfficeMSP", Role::Member, public_key_for(&secret), ts("2022-01-01T00:00:00Z"))
            .unwrap_err();
        assert!(matches!(err, IdentityError::WrongMsp { .. }));
    }

    #[test]
    fn altered_body_fails_verification() {
        let (ca, _, mut rng) = setup();
        let cert = ca
            .enroll("agent-1", Role::Member, &mut rng, ts("2022-01-01T00:00:00Z"))
            .certificate()
            .clone();
        let msp = ca.msp_config(vec![]);
        let now = ts("2021-06-01T00:00:00Z");
        let mut promoted = cert.clone();
        promoted.role = Role::Admin;
        assert!(!verify_certificate(&promoted, &msp, now));
        // flip one byte of the public key
        let mut keyed = cert.clone();
        keyed.public_key.0[0] ^= 1;
        assert!(!verify_certificate(&keyed, &msp, now));
        let mut renamed = cert;
        renamed.subject_id.push('x');
        assert!(!verify_certificate(&renamed, &msp, now));
    }

    #[test]
    fn expiry_and_foreign_root() {
        let (ca, visa, mut rng) = setup();
        let cert = ca
            .enroll("agent-1", Role::Member, &mut rng, ts("2022-01-01T00:00:00Z"))
            .certificate()
            .clone();
        let msp = ca.msp_config(vec![]);
        assert!(verify_certificate(&cert, &msp, ts("2022-01-01T00:00:00Z")));
        assert!(!verify_certificate(&cert, &msp, ts("2022-01-01T00:00:00.001Z")));
        let mut foreign = visa.msp_config(vec![]);
        assert!(!verify_certificate(&cert, &foreign, ts("2021-01-01T00:00:00Z")));
        // same name, different root key
        foreign.msp_id = "PassportOfficeMSP".into();
        assert!(!verify_certificate(&cert, &foreign, ts("2021-01-01T00:00:00Z")));
    }

    #[test]
    fn signatures() {
        let (ca, _, mut rng) = setup();
        let until = ts("2022-01-01T00:00:00Z");
        let alice = ca.enroll("alice", Role::Member, &mut rng, until);
        let bob = ca.enroll("bob", Role::Member, &mut rng, until);
        let sig = sign(&alice, b"hello");
        assert!(verify_signature(alice.certificate(), b"hello", &sig));
        assert!(!verify_signature(alice.certificate(), b"hellp", &sig));
        assert_eq!(sign(&alice, b"hello"), sig, "Ed25519 signing is deterministic");
        let truncated = Signature(sig.0[..63].to_vec());
        assert!(!verify_signature(alice.certificate(), b"hello", &truncated));
        let from_bob = sign(&bob, b"hello");
        assert!(!verify_signature(alice.certificate(), b"hello", &from_bob));
    }

    #[test]
    fn deterministic_issue() {
        let (ca, _, mut rng) = setup();
        let secret = generate_secret(&mut rng);
        let until = ts("2022-01-01T00:00:00Z");
        let a = ca.issue("s", "PassportOfficeMSP", Role::Member, public_key_for(&secret), until).unwrap();
        let b = ca.issue("s", "PassportOfficeMSP", Role::Member, public_key_for(&secret), until).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_file_round_trip() {
        let (ca, _, mut rng) = setup();
        let id = ca.enroll("peer0", Role::Member, &mut rng, ts("2022-01-01T00:00:00Z"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("peer0.id");
        id.save(&path).unwrap();
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = fs::metadata(&path).unwrap().permissions().mode();
            assert_eq!(mode & 0o777, 0o600);
        }
        let loaded = SigningIdentity::load(&path).unwrap();
        assert_eq!(loaded.certificate(), id.certificate());
        assert_eq!(loaded.sign(b"m"), id.sign(b"m"));
    }
}
