//! Line-delimited request/response protocol over a Unix socket.
//!
//! A request is one line `VERB <json>`; the reply is `OK <json>` or
//! `ERR {"code":..,"message":..}`. Payloads are canonical-encoded.
//!
//! | verb      | payload                              | reply                      |
//! |-----------|--------------------------------------|----------------------------|
//! | BROADCAST | transaction envelope                 | `{}`                       |
//! | DELIVER   | `{requester, from}`                  | list of blocks             |
//! | ENDORSE   | `{msp_id, proposal}`                 | `{envelope, response}`     |
//! | COMMIT    | `{msp_id, block}`                    | commit report              |

use std::io::{BufRead, BufReader, Write};
use std::os::unix::net::{UnixListener, UnixStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::codec::{self, hex_bytes};
use crate::identity::Certificate;
use crate::ledger::{Block, TransactionEnvelope};
use crate::network::{Network, NetworkError};
use crate::peer::Proposal;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeliverRequest {
    pub requester: Certificate,
    pub from: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndorseRequest {
    pub msp_id: String,
    pub proposal: Proposal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndorseReply {
    pub envelope: TransactionEnvelope,
    #[serde(with = "hex_bytes")]
    pub response: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitRequest {
    pub msp_id: String,
    pub block: Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

impl std::fmt::Display for WireError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for WireError {}

impl WireError {
    fn new(code: &str, message: impl Into<String>) -> Self {
        WireError {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<NetworkError> for WireError {
    fn from(e: NetworkError) -> Self {
        WireError::new(e.code(), e.to_string())
    }
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        WireError::new("IO", e.to_string())
    }
}

fn decode<T: DeserializeOwned>(payload: &str) -> Result<T, WireError> {
    codec::canonical_decode(payload.as_bytes()).map_err(|e| WireError::new("BAD_REQUEST", e.to_string()))
}

fn encode<T: Serialize>(value: &T) -> Value {
    codec::to_canonical_value(value).expect("wire replies are canonical")
}

/// Handles one request line against `network`.
pub fn handle_line(network: &Network, line: &str) -> Result<Value, WireError> {
    let (verb, payload) = line.split_once(' ').unwrap_or((line, ""));
    match verb {
        "BROADCAST" => {
            network.broadcast(decode::<TransactionEnvelope>(payload)?)?;
            Ok(Value::Object(Default::default()))
        }
        "DELIVER" => {
            let req: DeliverRequest = decode(payload)?;
            let now = network.now();
            let blocks = network
                .with_orderer(|o| o.deliver(&req.requester, req.from, now))
                .map_err(NetworkError::from)?;
            Ok(encode(&blocks))
        }
        "ENDORSE" => {
            let req: EndorseRequest = decode(payload)?;
            let endorsed = network.endorse(&req.msp_id, &req.proposal)?;
            Ok(encode(&EndorseReply {
                envelope: endorsed.envelope,
                response: endorsed.response,
            }))
        }
        "COMMIT" => {
            let req: CommitRequest = decode(payload)?;
            let report = network
                .with_peer_mut(&req.msp_id, |p| p.on_block_delivered(req.block))?
                .map_err(NetworkError::from)?;
            Ok(serde_json::json!({
                "block_number": report.block_number,
                "tx_ids": report.tx_ids,
                "validation_flags": report.validation_flags,
            }))
        }
        other => Err(WireError::new("UNKNOWN_VERB", format!("{other:?}"))),
    }
}

fn reply_line(result: Result<Value, WireError>) -> String {
    match result {
        Ok(v) => format!("OK {v}\n"),
        Err(e) => format!("ERR {}\n", serde_json::json!({"code": e.code, "message": e.message})),
    }
}

fn serve_connection(network: &Network, stream: UnixStream) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        writer.write_all(reply_line(handle_line(network, &line)).as_bytes())?;
    }
    Ok(())
}

/// Socket server; one thread per connection.
#[derive(Debug)]
pub struct WireServer {
    path: PathBuf,
    accept: Option<JoinHandle<()>>,
}

impl WireServer {
    pub fn bind(path: &Path, network: Arc<Network>) -> std::io::Result<Self> {
        if path.exists() {
            std::fs::remove_file(path)?;
        }
        let listener = UnixListener::bind(path)?;
        let accept = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let network = Arc::clone(&network);
                std::thread::spawn(move || {
                    if let Err(e) = serve_connection(&network, stream) {
                        tracing::debug!("wire connection closed: {e}");
                    }
                });
            }
        });
        Ok(WireServer {
            path: path.to_owned(),
            accept: Some(accept),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for WireServer {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
        // The accept loop exits once its listener errors; detach it.
        drop(self.accept.take());
    }
}

#[derive(Debug)]
pub struct WireClient {
    reader: BufReader<UnixStream>,
    writer: UnixStream,
}

impl WireClient {
    pub fn connect(path: &Path) -> std::io::Result<Self> {
        let writer = UnixStream::connect(path)?;
        Ok(WireClient {
            reader: BufReader::new(writer.try_clone()?),
            writer,
        })
    }

    /// Sends `VERB payload` and waits for the reply line.
    pub fn request<T: Serialize>(&mut self, verb: &str, payload: &T) -> Result<Value, WireError> {
        let body = codec::canonical_encode(payload).map_err(|e| WireError::new(e.code(), e.to_string()))?;
        let mut line = Vec::with_capacity(verb.len() + body.len() + 2);
        line.extend_from_slice(verb.as_bytes());
        line.push(b' ');
        line.extend_from_slice(&body);
        line.push(b'\n');
        self.writer.write_all(&line)?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(WireError::new("IO", "connection closed"));
        }
        let reply = reply.trim_end();
        let parse = |s: &str| serde_json::from_str::<Value>(s).map_err(|e| WireError::new("BAD_REPLY", e.to_string()));
        match reply.split_once(' ') {
            Some(("OK", body)) => parse(body),
            Some(("ERR", body)) => Err(serde_json::from_value(parse(body)?)
                .map_err(|e| WireError::new("BAD_REPLY", e.to_string()))?),
            _ => Err(WireError::new("BAD_REPLY", reply)),
        }
    }

    pub fn broadcast(&mut self, tx: &TransactionEnvelope) -> Result<(), WireError> {
        self.request("BROADCAST", tx).map(|_| ())
    }

    pub fn deliver(&mut self, requester: &Certificate, from: u64) -> Result<Vec<Block>, WireError> {
        let v = self.request(
            "DELIVER",
            &DeliverRequest {
                requester: requester.clone(),
                from,
            },
        )?;
        serde_json::from_value(v).map_err(|e| WireError::new("BAD_REPLY", e.to_string()))
    }

    pub fn endorse(&mut self, msp_id: &str, proposal: &Proposal) -> Result<EndorseReply, WireError> {
        let v = self.request(
            "ENDORSE",
            &EndorseRequest {
                msp_id: msp_id.into(),
                proposal: proposal.clone(),
            },
        )?;
        serde_json::from_value(v).map_err(|e| WireError::new("BAD_REPLY", e.to_string()))
    }

    pub fn commit(&mut self, msp_id: &str, block: &Block) -> Result<Value, WireError> {
        self.request(
            "COMMIT",
            &CommitRequest {
                msp_id: msp_id.into(),
                block: block.clone(),
            },
        )
    }
}
