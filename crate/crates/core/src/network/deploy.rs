use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Network, NetworkError, Topology, RECEIPT_TIMEOUT};
use crate::chaincode::{password_digest, TravelConfig, TravelContract, TravelRole, SALT_LEN};
use crate::channel::{ChannelConfig, DEFAULT_MAX_PENDING};
use crate::codec;
use crate::digest::HashAlgorithm;
use crate::identity::{
    parse_policy, CertificateAuthority, Role, SigningIdentity, DEFAULT_VALIDITY, SIGNATURE_SCHEME,
};
use crate::ledger::Ledger;
use crate::ordering::{create_channel, Orderer};
use crate::peer::Peer;
use crate::time::Clock;

/// Directory (under the data dir) holding the orderer's block log.
pub const ORDERER_DIR: &str = "_orderer";
const MANIFEST_FILE: &str = "network.json";
const CHAINCODE_FILE: &str = "chaincode.json";
const CA_FILE: &str = "ca.identity";
const PEER_SUBJECT: &str = "peer0";
const ORDERER_SUBJECT: &str = "orderer";
const GATEWAY_SUBJECT: &str = "gateway";
const ROOT_VALIDITY: Duration = Duration::from_secs(10 * 365 * 24 * 3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrgKind {
    Orderer,
    PassportOffice,
    VisaOffice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgEntry {
    pub msp_id: String,
    pub kind: OrgKind,
    pub country: Option<String>,
}

/// Secret-free description of a bootstrapped network, kept at the root of
/// the data directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkManifest {
    pub channel_id: String,
    pub orgs: Vec<OrgEntry>,
}

impl NetworkManifest {
    pub fn orderer_msp(&self) -> &str {
        self.org_of(OrgKind::Orderer)
    }

    pub fn passport_msp(&self) -> &str {
        self.org_of(OrgKind::PassportOffice)
    }

    fn org_of(&self, kind: OrgKind) -> &str {
        &self
            .orgs
            .iter()
            .find(|o| o.kind == kind)
            .expect("manifest lists every org kind")
            .msp_id
    }

    /// MSP of the visa office for `country`.
    pub fn visa_msp(&self, country: &str) -> Option<&str> {
        self.orgs
            .iter()
            .find(|o| o.kind == OrgKind::VisaOffice && o.country.as_deref() == Some(country))
            .map(|o| o.msp_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstalledChaincode {
    name: String,
    version: String,
    config: TravelConfig,
}

/// A running network with the key material its operators hold.
#[derive(Debug)]
pub struct Deployment {
    pub network: Arc<Network>,
    pub manifest: NetworkManifest,
    /// Identity the gateway signs anonymous requests with.
    pub gateway: SigningIdentity,
    /// The orderer node identity; the channel admin.
    pub orderer_admin: SigningIdentity,
    pub authorities: BTreeMap<String, CertificateAuthority>,
    pub data_dir: Option<PathBuf>,
}

impl Deployment {
    pub fn authority(&self, msp_id: &str) -> Option<&CertificateAuthority> {
        self.authorities.get(msp_id)
    }

    /// Does every peer hold the same chain and state as the orderer?
    pub fn peers_in_sync(&self) -> bool {
        let (height, last) = self.network.with_orderer(|o| {
            (o.height(), o.ledger().chain().last_header().cloned())
        });
        self.manifest.orgs.iter().all(|org| {
            self.network
                .with_peer(&org.msp_id, |p| {
                    p.height() == height && p.ledger().chain().last_header().cloned() == last
                })
                .unwrap_or(false)
        })
    }
}

fn dir_is_empty(dir: &Path) -> std::io::Result<bool> {
    match fs::read_dir(dir) {
        Ok(mut entries) => Ok(entries.next().is_none()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(true),
        Err(e) => Err(e),
    }
}

fn identity_path(dir: &Path, msp: &str, subject: &str) -> PathBuf {
    dir.join(msp).join(format!("{subject}.identity"))
}

fn ledger_dir(dir: &Path, msp: &str, channel: &str) -> PathBuf {
    dir.join(msp).join(channel)
}

struct OrgKeys {
    ca: CertificateAuthority,
    peer: SigningIdentity,
}

/// Creates the network described by `topology` under `data_dir`.
pub fn bootstrap<R: Rng + ?Sized>(
    topology: &Topology,
    data_dir: &Path,
    rng: &mut R,
    clock: Arc<dyn Clock>,
) -> Result<Deployment, NetworkError> {
    topology.validate()?;
    if !dir_is_empty(data_dir)? {
        return Err(NetworkError::DirNotEmpty(data_dir.to_path_buf()));
    }
    build(topology, Some(data_dir), rng, clock)
}

/// The same network as [`bootstrap`], held only in memory.
pub fn bootstrap_in_memory<R: Rng + ?Sized>(
    topology: &Topology,
    rng: &mut R,
    clock: Arc<dyn Clock>,
) -> Result<Deployment, NetworkError> {
    topology.validate()?;
    build(topology, None, rng, clock)
}

fn build<R: Rng + ?Sized>(
    topology: &Topology,
    data_dir: Option<&Path>,
    rng: &mut R,
    clock: Arc<dyn Clock>,
) -> Result<Deployment, NetworkError> {
    let now = clock.now();
    let root_until = now.saturating_add(ROOT_VALIDITY);
    let leaf_until = now.saturating_add(DEFAULT_VALIDITY);
    let channel = topology.channel_id.as_str();
    let orderer_msp = topology.orderer.msp_id.as_str();

    let mut orgs = vec![OrgEntry {
        msp_id: orderer_msp.into(),
        kind: OrgKind::Orderer,
        country: None,
    }];
    orgs.push(OrgEntry {
        msp_id: topology.passport_office.msp_id.clone(),
        kind: OrgKind::PassportOffice,
        country: None,
    });
    orgs.extend(topology.visa_offices.iter().map(|v| OrgEntry {
        msp_id: v.msp_id.clone(),
        kind: OrgKind::VisaOffice,
        country: Some(v.country.clone()),
    }));
    let manifest = NetworkManifest {
        channel_id: channel.into(),
        orgs,
    };

    let mut keys: BTreeMap<String, OrgKeys> = BTreeMap::new();
    let mut authorities = BTreeMap::new();
    for org in &manifest.orgs {
        let ca = CertificateAuthority::generate(&org.msp_id, rng, root_until);
        let peer = ca.enroll(PEER_SUBJECT, Role::Member, rng, leaf_until);
        authorities.insert(org.msp_id.clone(), ca.clone());
        keys.insert(org.msp_id.clone(), OrgKeys { ca, peer });
    }
    let orderer_ca = &keys[orderer_msp].ca;
    let orderer_admin = orderer_ca.enroll(ORDERER_SUBJECT, Role::Admin, rng, leaf_until);
    let gateway = orderer_ca.enroll(GATEWAY_SUBJECT, Role::Member, rng, leaf_until);

    let msps = manifest
        .orgs
        .iter()
        .map(|org| {
            let admins = if org.msp_id == orderer_msp {
                vec![ORDERER_SUBJECT.to_string(), topology.orderer.admin.subject_id.clone()]
            } else {
                vec![]
            };
            keys[&org.msp_id].ca.msp_config(admins)
        })
        .collect();
    let policy = |text: String| parse_policy(&text).expect("generated policy text parses");
    let config = ChannelConfig {
        channel_id: channel.into(),
        hash_function: HashAlgorithm::Sha256,
        signature_scheme: SIGNATURE_SCHEME.into(),
        msps,
        readers_policy: policy(format!("OR('{orderer_msp}.member')")),
        writers_policy: policy(format!("OR('{orderer_msp}.member')")),
        admins_policy: policy(format!("OR('{orderer_msp}.admin')")),
        batch_max_count: topology.batch.max_count,
        batch_timeout_ms: topology.batch.timeout_ms,
        max_pending: DEFAULT_MAX_PENDING,
        orderer_certificate: orderer_admin.certificate().clone(),
    };
    config
        .validate()
        .map_err(|e| NetworkError::Topology(e.to_string()))?;
    let genesis = create_channel(&config, &orderer_admin, now)?;
    let travel = TravelConfig::new(topology.passport_office.msp_id.clone());

    if let Some(dir) = data_dir {
        fs::create_dir_all(dir)?;
        for (msp, k) in &keys {
            fs::create_dir_all(dir.join(msp))?;
            k.ca.identity().save(&dir.join(msp).join(CA_FILE))?;
            k.peer.save(&identity_path(dir, msp, PEER_SUBJECT))?;
            let installed = vec![InstalledChaincode {
                name: crate::chaincode::TRAVEL_CHAINCODE.into(),
                version: crate::chaincode::TRAVEL_VERSION.into(),
                config: travel.clone(),
            }];
            fs::write(dir.join(msp).join(CHAINCODE_FILE), codec::encode_record(&installed))?;
        }
        orderer_admin.save(&identity_path(dir, orderer_msp, ORDERER_SUBJECT))?;
        gateway.save(&identity_path(dir, orderer_msp, GATEWAY_SUBJECT))?;
        fs::write(dir.join(MANIFEST_FILE), codec::encode_record(&manifest))?;
    }

    let open_ledger = |path: Option<PathBuf>| -> Result<Ledger, NetworkError> {
        let mut ledger = match path {
            Some(p) => Ledger::open(&p)?,
            None => Ledger::in_memory(),
        };
        ledger.commit(genesis.clone())?;
        Ok(ledger)
    };
    let orderer_ledger = open_ledger(data_dir.map(|d| d.join(ORDERER_DIR).join(channel)))?;
    let orderer = Orderer::new(orderer_admin.clone(), orderer_ledger, now)?;
    let contract = Arc::new(TravelContract::new(travel));
    let mut peers = Vec::new();
    for org in &manifest.orgs {
        let ledger = open_ledger(data_dir.map(|d| ledger_dir(d, &org.msp_id, channel)))?;
        let mut peer = Peer::new(keys[&org.msp_id].peer.clone(), ledger);
        peer.install_chaincode(contract.clone())?;
        peers.push(peer);
    }
    let network = Arc::new(Network::new(
        orderer,
        orderer_admin.certificate().clone(),
        peers,
        clock,
    ));
    let deployment = Deployment {
        network,
        manifest,
        gateway,
        orderer_admin,
        authorities,
        data_dir: data_dir.map(Path::to_path_buf),
    };
    register_accounts(&deployment, topology, rng)?;
    Ok(deployment)
}

/// Registers the channel admin and one agent per office.
fn register_accounts<R: Rng + ?Sized>(
    deployment: &Deployment,
    topology: &Topology,
    rng: &mut R,
) -> Result<(), NetworkError> {
    let orderer_msp = topology.orderer.msp_id.as_str();
    let mut accounts = vec![
        (&topology.orderer.admin, TravelRole::ChannelAdmin, orderer_msp),
        (
            &topology.passport_office.agent,
            TravelRole::PassportAgent,
            topology.passport_office.msp_id.as_str(),
        ),
    ];
    for office in &topology.visa_offices {
        accounts.push((
            &office.agent,
            TravelRole::VisaAgent(office.country.clone()),
            office.msp_id.as_str(),
        ));
    }
    let network = &deployment.network;
    for (account, role, msp) in accounts {
        let mut salt = [0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        let digest = password_digest(&salt, &account.password);
        let proposal = network.proposal(
            &deployment.orderer_admin,
            "registerAgent",
            vec![
                account.subject_id.clone(),
                role.to_string(),
                msp.to_string(),
                hex::encode(salt),
                digest.to_hex(),
            ],
        );
        let endorsers: Vec<&str> = if msp == orderer_msp {
            vec![orderer_msp]
        } else {
            vec![orderer_msp, msp]
        };
        let receipt = network.submit(&proposal, &endorsers, RECEIPT_TIMEOUT)?;
        if !receipt.is_valid() {
            return Err(NetworkError::Bootstrap(format!(
                "registering {} ended {}",
                account.subject_id, receipt.validity
            )));
        }
    }
    Ok(())
}

pub fn read_manifest(data_dir: &Path) -> Result<NetworkManifest, NetworkError> {
    let manifest_path = data_dir.join(MANIFEST_FILE);
    match fs::read(&manifest_path) {
        Ok(bytes) => codec::canonical_decode(&bytes)
            .map_err(|e| NetworkError::NotBootstrapped(format!("{}: {e}", manifest_path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(NetworkError::NotBootstrapped(data_dir.display().to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Every ledger copy under `data_dir`, labelled: the orderer's first, then
/// one per organization's peer.
pub fn ledger_dirs(data_dir: &Path) -> Result<Vec<(String, PathBuf)>, NetworkError> {
    let manifest = read_manifest(data_dir)?;
    let channel = &manifest.channel_id;
    let mut dirs = vec![("orderer".to_string(), data_dir.join(ORDERER_DIR).join(channel))];
    dirs.extend(
        manifest
            .orgs
            .iter()
            .map(|org| (org.msp_id.clone(), ledger_dir(data_dir, &org.msp_id, channel))),
    );
    Ok(dirs)
}

/// Opens a network previously created by [`bootstrap`].
pub fn load(data_dir: &Path, clock: Arc<dyn Clock>) -> Result<Deployment, NetworkError> {
    let manifest = read_manifest(data_dir)?;
    let channel = manifest.channel_id.clone();
    let orderer_msp = manifest.orderer_msp().to_owned();
    let now = clock.now();

    let orderer_admin = SigningIdentity::load(&identity_path(data_dir, &orderer_msp, ORDERER_SUBJECT))?;
    let gateway = SigningIdentity::load(&identity_path(data_dir, &orderer_msp, GATEWAY_SUBJECT))?;
    let orderer_ledger = Ledger::open(&data_dir.join(ORDERER_DIR).join(&channel))?;
    let orderer = Orderer::new(orderer_admin.clone(), orderer_ledger, now)?;

    let mut authorities = BTreeMap::new();
    let mut peers = Vec::new();
    for org in &manifest.orgs {
        let ca = SigningIdentity::load(&data_dir.join(&org.msp_id).join(CA_FILE))?;
        authorities.insert(org.msp_id.clone(), CertificateAuthority::from_identity(ca));
        let identity = SigningIdentity::load(&identity_path(data_dir, &org.msp_id, PEER_SUBJECT))?;
        let ledger = Ledger::open(&ledger_dir(data_dir, &org.msp_id, &channel))?;
        let mut peer = Peer::new(identity, ledger);
        let installed: Vec<InstalledChaincode> =
            codec::canonical_decode(&fs::read(data_dir.join(&org.msp_id).join(CHAINCODE_FILE))?)
                .map_err(|e| NetworkError::NotBootstrapped(e.to_string()))?;
        for cc in installed {
            peer.install_chaincode(Arc::new(TravelContract::new(cc.config)))?;
        }
        peers.push(peer);
    }
    let network = Arc::new(Network::new(
        orderer,
        orderer_admin.certificate().clone(),
        peers,
        clock,
    ));
    // a peer may have crashed before receiving the last blocks
    network.sync_peers()?;
    Ok(Deployment {
        network,
        manifest,
        gateway,
        orderer_admin,
        authorities,
        data_dir: Some(data_dir.to_path_buf()),
    })
}
