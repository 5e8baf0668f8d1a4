//! Read-only integrity audit of every ledger copy under a data directory.
//!
//! Works from the raw files: opening a ledger would repair a torn tail and
//! hide exactly what an audit should report.

use std::fmt;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use passchain_core::codec;
use passchain_core::digest::{compute_digest, Digest};
use passchain_core::ledger::{
    parse_log, replay, verify_log_bytes, IntegrityFailure, IntegrityReport, Snapshot, LOG_FILE, SNAPSHOT_FILE,
};
use passchain_core::network::{ledger_dirs, NetworkError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnapshotCheck {
    Current,
    /// Behind the log; rebuilt from the log on the next open.
    Stale { last_block: Option<u64> },
    Missing,
    /// Same height as the log but different contents, or ahead of it.
    Mismatch(String),
    NotChecked,
}

impl SnapshotCheck {
    fn is_failure(&self) -> bool {
        matches!(self, SnapshotCheck::Mismatch(_))
    }
}

#[derive(Debug, Clone)]
pub struct LedgerAudit {
    pub label: String,
    pub integrity: IntegrityReport,
    pub head: Option<Digest>,
    pub state: Option<Digest>,
    pub snapshot: SnapshotCheck,
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub ledgers: Vec<LedgerAudit>,
    /// One line per pair of intact ledgers that disagree.
    pub divergences: Vec<String>,
}

impl AuditReport {
    pub fn failures(&self) -> usize {
        self.ledgers
            .iter()
            .filter(|l| !l.integrity.is_ok() || l.snapshot.is_failure())
            .count()
            + self.divergences.len()
    }

    pub fn is_ok(&self) -> bool {
        self.failures() == 0
    }
}

fn short(d: &Option<Digest>) -> String {
    d.map(|d| d.to_hex()[..12].to_owned()).unwrap_or_else(|| "-".into())
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.ledgers.iter().map(|l| l.label.len()).max().unwrap_or(0);
        for l in &self.ledgers {
            write!(f, "{:<width$}  {}", l.label, l.integrity)?;
            if l.integrity.is_ok() {
                write!(f, "  head {}  state {}", short(&l.head), short(&l.state))?;
            }
            match &l.snapshot {
                SnapshotCheck::Current => writeln!(f, "  snapshot current")?,
                SnapshotCheck::Stale { last_block } => writeln!(f, "  note: snapshot stale at {last_block:?}")?,
                SnapshotCheck::Missing => writeln!(f, "  note: no snapshot")?,
                SnapshotCheck::Mismatch(why) => writeln!(f, "  FAILED snapshot: {why}")?,
                SnapshotCheck::NotChecked => writeln!(f)?,
            }
        }
        for d in &self.divergences {
            writeln!(f, "DIVERGED {d}")?;
        }
        if self.divergences.is_empty() && self.ledgers.iter().all(|l| l.integrity.is_ok()) {
            writeln!(f, "all {} ledger copies identical", self.ledgers.len())?;
        }
        match self.failures() {
            0 => write!(f, "audit OK"),
            n => write!(f, "audit FAILED: {n} problem(s)"),
        }
    }
}

fn audit_ledger(label: &str, dir: &Path) -> Result<LedgerAudit, NetworkError> {
    let bytes = match fs::read(dir.join(LOG_FILE)) {
        Ok(b) => b,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Ok(LedgerAudit {
                label: label.into(),
                integrity: IntegrityReport {
                    height: 0,
                    failure: Some(IntegrityFailure {
                        block_number: 0,
                        reason: format!("{} missing", dir.join(LOG_FILE).display()),
                    }),
                },
                head: None,
                state: None,
                snapshot: SnapshotCheck::NotChecked,
            });
        }
        Err(e) => return Err(e.into()),
    };
    let integrity = verify_log_bytes(&bytes);
    let mut audit = LedgerAudit {
        label: label.into(),
        integrity,
        head: None,
        state: None,
        snapshot: SnapshotCheck::NotChecked,
    };
    if !audit.integrity.is_ok() {
        return Ok(audit);
    }
    let blocks = parse_log(&bytes).blocks;
    let state = match replay(&blocks) {
        Ok(s) => s,
        Err(e) => {
            audit.integrity.failure = Some(e.0);
            return Ok(audit);
        }
    };
    audit.head = blocks.last().map(|b| b.header.digest());
    audit.state = Some(compute_digest(&state.canonical_bytes()));
    let last = blocks.last().map(|b| b.header.number);
    audit.snapshot = match fs::read(dir.join(SNAPSHOT_FILE)) {
        Err(e) if e.kind() == ErrorKind::NotFound => SnapshotCheck::Missing,
        Err(e) => return Err(e.into()),
        Ok(raw) => match codec::canonical_decode::<Snapshot>(&raw) {
            Err(e) => SnapshotCheck::Mismatch(format!("undecodable: {e}")),
            Ok(snap) if snap.last_block == last && snap.entries == state => SnapshotCheck::Current,
            Ok(snap) if snap.last_block == last => {
                SnapshotCheck::Mismatch(format!("contents differ from replay at block {last:?}"))
            }
            Ok(snap) if snap.last_block < last => SnapshotCheck::Stale {
                last_block: snap.last_block,
            },
            Ok(snap) => SnapshotCheck::Mismatch(format!(
                "snapshot at block {:?} is ahead of the log ending at {last:?}",
                snap.last_block
            )),
        },
    };
    Ok(audit)
}

/// Audits every ledger named by the data directory's manifest, then
/// compares the intact ones pairwise.
pub fn audit(data_dir: &Path) -> Result<AuditReport, NetworkError> {
    let mut report = AuditReport::default();
    for (label, dir) in ledger_dirs(data_dir)? {
        report.ledgers.push(audit_ledger(&label, &dir)?);
    }
    let intact: Vec<&LedgerAudit> = report.ledgers.iter().filter(|l| l.integrity.is_ok()).collect();
    for (i, a) in intact.iter().enumerate() {
        for b in &intact[i + 1..] {
            let why = if a.integrity.height != b.integrity.height {
                format!("height {} vs {}", a.integrity.height, b.integrity.height)
            } else if a.head != b.head {
                format!("head {} vs {}", short(&a.head), short(&b.head))
            } else if a.state != b.state {
                format!("state {} vs {}", short(&a.state), short(&b.state))
            } else {
                continue;
            };
            report.divergences.push(format!("{} vs {}: {why}", a.label, b.label));
        }
    }
    Ok(report)
}
