use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::chain::{check_blocks, IntegrityFailure, IntegrityReport};
use super::{Block, WorldState};
use crate::codec;

pub const LOG_FILE: &str = "blocks.log";
pub const SNAPSHOT_FILE: &str = "state.snapshot";

/// Advisory world-state snapshot; always rebuildable from the log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub last_block: Option<u64>,
    pub entries: WorldState,
}

/// One log record: 4-byte big-endian length, then the canonical block.
pub fn encode_log_record(block: &Block) -> Vec<u8> {
    let body = block.canonical_bytes();
    let len = u32::try_from(body.len()).expect("block exceeds 4 GiB");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Result of splitting a log file into blocks.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    /// Blocks decoded before the first bad record.
    pub blocks: Vec<Block>,
    /// Byte length of the well-formed prefix.
    pub valid_len: usize,
    /// Why parsing stopped early, if it did.
    pub failure: Option<IntegrityFailure>,
    /// True when the only problem is an incomplete final record.
    pub torn_tail: bool,
}

/// Decodes records until the first framing, decoding or canonical-form error.
pub fn parse_log(bytes: &[u8]) -> ParsedLog {
    let mut blocks = Vec::new();
    let mut offset = 0usize;
    let fail = |blocks: &Vec<Block>, reason: &str| IntegrityFailure {
        block_number: blocks.len() as u64,
        reason: reason.to_string(),
    };
    while offset < bytes.len() {
        let rest = &bytes[offset..];
        let Some(len_bytes) = rest.get(..4) else {
            return ParsedLog {
                failure: Some(fail(&blocks, "truncated record length")),
                blocks,
                valid_len: offset,
                torn_tail: true,
            };
        };
        let len = u32::from_be_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        let Some(body) = rest.get(4..4 + len) else {
            return ParsedLog {
                failure: Some(fail(&blocks, "truncated record body")),
                blocks,
                valid_len: offset,
                torn_tail: true,
            };
        };
        let block: Block = match codec::canonical_decode(body) {
            Ok(b) => b,
            Err(e) => {
                let reason = format!("undecodable record: {e}");
                return ParsedLog {
                    failure: Some(fail(&blocks, &reason)),
                    blocks,
                    valid_len: offset,
                    torn_tail: false,
                };
            }
        };
        if block.canonical_bytes() != body {
            return ParsedLog {
                failure: Some(fail(&blocks, "record is not in canonical form")),
                blocks,
                valid_len: offset,
                torn_tail: false,
            };
        }
        blocks.push(block);
        offset += 4 + len;
    }
    ParsedLog {
        blocks,
        valid_len: offset,
        failure: None,
        torn_tail: false,
    }
}

/// Full integrity check of raw log bytes: framing, canonical form, then
/// chain verification of the decodable prefix.
pub fn verify_log_bytes(bytes: &[u8]) -> IntegrityReport {
    let parsed = parse_log(bytes);
    let (chain_failure, _) = check_blocks(&parsed.blocks);
    let failure = match (chain_failure, parsed.failure) {
        (Some(a), Some(b)) => Some(if a.block_number <= b.block_number { a } else { b }),
        (a, b) => a.or(b),
    };
    IntegrityReport {
        height: parsed.blocks.len() as u64,
        failure,
    }
}

/// On-disk files for one channel ledger.
#[derive(Debug)]
pub struct LedgerStore {
    dir: PathBuf,
    log: File,
}

impl LedgerStore {
    /// Opens the log under `dir`, creating it if absent, and returns the
    /// decoded blocks. An incomplete trailing record left by a crash during
    /// append is cut off; any other damage is an error.
    pub fn open(dir: &Path) -> io::Result<(Self, Vec<Block>)> {
        fs::create_dir_all(dir)?;
        let log_path = dir.join(LOG_FILE);
        let bytes = match fs::read(&log_path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e),
        };
        let parsed = parse_log(&bytes);
        if let Some(failure) = &parsed.failure {
            if !parsed.torn_tail {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("CORRUPT_CHAIN: {failure}"),
                ));
            }
            tracing::warn!(
                path = %log_path.display(),
                dropped = bytes.len() - parsed.valid_len,
                "truncating incomplete trailing log record"
            );
        }
        let log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&log_path)?;
        if parsed.torn_tail {
            log.set_len(parsed.valid_len as u64)?;
            log.sync_all()?;
        }
        Ok((
            LedgerStore {
                dir: dir.to_path_buf(),
                log,
            },
            parsed.blocks,
        ))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self) -> PathBuf {
        self.dir.join(LOG_FILE)
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.dir.join(SNAPSHOT_FILE)
    }

    /// Appends one record and syncs it to disk.
    pub fn append(&mut self, block: &Block) -> io::Result<()> {
        self.log.write_all(&encode_log_record(block))?;
        self.log.sync_data()
    }

    pub fn read_snapshot(&self) -> io::Result<Option<Snapshot>> {
        match fs::read(self.snapshot_path()) {
            Ok(bytes) => codec::canonical_decode(&bytes)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Atomically replaces the snapshot file.
    pub fn write_snapshot(&self, state: &WorldState, last_block: u64) -> io::Result<()> {
        let snapshot = SnapshotRef {
            last_block: Some(last_block),
            entries: state,
        };
        let bytes = codec::encode_record(&snapshot);
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_data()?;
        }
        fs::rename(tmp, self.snapshot_path())
    }
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    last_block: Option<u64>,
    entries: &'a WorldState,
}
