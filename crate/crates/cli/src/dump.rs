//! Export of committed blocks, one canonical-encoded file per block.

use std::fs;
use std::path::{Path, PathBuf};

use passchain_core::ledger::{parse_log, LOG_FILE};
use passchain_core::network::ledger_dirs;

use crate::CliError;

pub fn block_file_name(number: u64) -> String {
    format!("block-{number:06}.json")
}

/// Writes blocks `from..=to` of the orderer's log into `out`. Both bounds
/// default to the ends of the chain.
pub fn dump(data_dir: &Path, from: Option<u64>, to: Option<u64>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (_, orderer_dir) = ledger_dirs(data_dir)?
        .into_iter()
        .next()
        .ok_or_else(|| CliError::Usage("manifest lists no ledgers".into()))?;
    let parsed = parse_log(&fs::read(orderer_dir.join(LOG_FILE))?);
    if let Some(failure) = &parsed.failure {
        eprintln!("warning: log unreadable from {failure}; dumping the prefix before it");
    }
    let height = parsed.blocks.len() as u64;
    let from = from.unwrap_or(0);
    let to = match to {
        Some(to) => to,
        None => height.checked_sub(1).ok_or_else(|| CliError::Usage("the chain is empty".into()))?,
    };
    if from > to || to >= height {
        return Err(CliError::Usage(format!(
            "OUT_OF_RANGE: blocks {from}..={to} requested, height is {height}"
        )));
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for block in &parsed.blocks[from as usize..=to as usize] {
        let path = out.join(block_file_name(block.header.number));
        fs::write(&path, block.canonical_bytes())?;
        written.push(path);
    }
    Ok(written)
}
