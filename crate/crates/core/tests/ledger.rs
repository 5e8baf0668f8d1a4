mod common;

use std::fs::OpenOptions;
use std::io::Write;

use common::mini::{oracle_digest, Mini};
use passchain_core::channel::CONFIG_KEY;
use passchain_core::digest::Digest;
use passchain_core::ledger::{
    apply_block, replay, validate_transactions, verify_chain, verify_log_bytes, Block, Chain, Ledger,
    ValidationCode, Version, WorldState, LOG_FILE, SNAPSHOT_FILE,
};

use ValidationCode::*;

fn committed(mini: &Mini, blocks: usize) -> Ledger {
    let mut ledger = Ledger::in_memory();
    ledger.commit(mini.genesis.clone()).unwrap();
    for n in 0..blocks {
        let prev = ledger.chain().last_header().unwrap().clone();
        let key = format!("K{n}");
        let tx = mini.tx(&format!("tx{n}"), &[], &[(&key, Some(b"v"))]);
        ledger.commit(mini.block_after(&prev, vec![tx])).unwrap();
    }
    ledger
}

#[test]
fn genesis_on_empty_chain() {
    let mini = Mini::new(1, 10, 100);
    let mut chain = Chain::new();
    assert_eq!(mini.genesis.header.number, 0);
    assert_eq!(mini.genesis.header.prev_hash, Digest::ZERO);
    chain.append_block(mini.genesis.clone()).unwrap();
    assert_eq!(chain.height(), 1);
}

#[test]
fn append_rejects_gap() {
    let mini = Mini::new(1, 10, 100);
    let mut ledger = committed(&mini, 2);
    assert_eq!(ledger.height(), 3);
    let prev = ledger.chain().last_header().unwrap().clone();
    let block = mini.block(5, oracle_digest(&prev), vec![mini.tx("late", &[], &[("X", Some(b"1"))])]);
    let err = ledger.commit(block).unwrap_err();
    assert_eq!(err.code(), "CHAIN_GAP");
    assert_eq!(ledger.height(), 3);
}

#[test]
fn append_rejects_flipped_data_byte() {
    let mini = Mini::new(1, 10, 100);
    let mut ledger = committed(&mini, 1);
    let prev = ledger.chain().last_header().unwrap().clone();
    let mut block = mini.block_after(&prev, vec![mini.tx("t", &[], &[("X", Some(b"abc"))])]);
    block.data[0].payload.write_set[0].value = Some(b"abd".to_vec());
    // the recorded data hash no longer matches an independent recomputation
    assert_ne!(oracle_digest(&block.data), block.header.data_hash);
    let before = ledger.state();
    assert_eq!(ledger.commit(block).unwrap_err().code(), "HASH_MISMATCH");
    assert_eq!(*ledger.state(), *before);
}

#[test]
fn append_rejects_bad_link_and_signature() {
    let mini = Mini::new(1, 10, 100);
    let mut ledger = committed(&mini, 1);
    let prev = ledger.chain().last_header().unwrap().clone();
    let block = mini.block(prev.number + 1, Digest::ZERO, vec![]);
    assert_eq!(ledger.commit(block).unwrap_err().code(), "HASH_MISMATCH");

    let mut block = mini.block_after(&prev, vec![]);
    block.metadata.orderer_signature = mini.peer.sign(&block.header.canonical_bytes());
    assert_eq!(ledger.commit(block).unwrap_err().code(), "BAD_ORDERER_SIG");
}

#[test]
fn headers_link_by_digest() {
    let mini = Mini::new(2, 10, 100);
    let ledger = committed(&mini, 9);
    let blocks = ledger.chain().blocks();
    assert_eq!(blocks.len(), 10);
    for pair in blocks.windows(2) {
        assert_eq!(pair[1].header.prev_hash, oracle_digest(&pair[0].header));
    }
    let report = verify_chain(blocks);
    assert!(report.is_ok(), "{report}");
    assert_eq!(report.height, 10);
}

#[test]
fn empty_chain_verifies() {
    assert!(verify_chain(&[]).is_ok());
    assert_eq!(replay(&[]).unwrap(), WorldState::new());
}

#[test]
fn verify_names_the_tampered_block() {
    let mini = Mini::new(3, 10, 100);
    let ledger = committed(&mini, 4);
    let mut blocks: Vec<Block> = ledger.chain().blocks().to_vec();
    blocks[3].data[0].payload.args.push("x".into());
    let failure = verify_chain(&blocks).failure.unwrap();
    assert_eq!(failure.block_number, 3);
    assert!(replay(&blocks).is_err());

    let mut blocks: Vec<Block> = ledger.chain().blocks().to_vec();
    blocks[2].metadata.validation_flags[0] = MvccConflict;
    assert_eq!(verify_chain(&blocks).failure.unwrap().block_number, 2);
}

#[test]
fn intra_block_conflict() {
    let mini = Mini::new(4, 10, 100);
    let mut ledger = committed(&mini, 0);
    let prev = ledger.chain().last_header().unwrap().clone();
    let seed = mini.tx("seed", &[], &[("K", Some(b"0"))]);
    ledger.commit(mini.block_after(&prev, vec![seed])).unwrap();
    let v = ledger.state().version("K");
    assert_eq!(v, Some(Version::new(1, 0)));

    let a = mini.tx("a", &[("K", v)], &[("K", Some(b"a"))]);
    let b = mini.tx("b", &[("K", v)], &[("K", Some(b"b"))]);
    let prev = ledger.chain().last_header().unwrap().clone();
    let report = ledger.commit(mini.block_after(&prev, vec![a, b])).unwrap();
    assert_eq!(report.validation_flags, vec![Valid, MvccConflict]);
    let entry = ledger.state().get("K").unwrap().clone();
    assert_eq!(entry.value, b"a");
    assert_eq!(entry.version, Version::new(2, 0));
}

#[test]
fn matching_reads_are_valid() {
    let mini = Mini::new(4, 10, 100);
    let ledger = committed(&mini, 2);
    let state = ledger.state();
    let prev = ledger.chain().last_header().unwrap().clone();
    let tx = mini.tx(
        "r",
        &[("K0", state.version("K0")), ("K1", state.version("K1")), ("missing", None)],
        &[("out", Some(b"1"))],
    );
    let block = mini.block_after(&prev, vec![tx]);
    assert_eq!(validate_transactions(&block, &state, |_| false), vec![Valid]);

    let stale = mini.tx("s", &[("K0", None)], &[]);
    let block = mini.block_after(&prev, vec![stale]);
    assert_eq!(validate_transactions(&block, &state, |_| false), vec![MvccConflict]);
}

#[test]
fn reused_tx_id_is_duplicate() {
    let mini = Mini::new(5, 10, 100);
    let mut ledger = committed(&mini, 1);
    let prev = ledger.chain().last_header().unwrap().clone();
    let replayed = mini.tx("tx0", &[], &[("K0", Some(b"evil"))]);
    let twice = mini.tx("fresh", &[], &[("A", Some(b"1"))]);
    let report = ledger
        .commit(mini.block_after(&prev, vec![replayed, twice.clone(), twice]))
        .unwrap();
    assert_eq!(report.validation_flags, vec![DuplicateTxid, Valid, DuplicateTxid]);
    assert_eq!(ledger.state().get("K0").unwrap().value, b"v");
}

#[test]
fn apply_sets_position_versions() {
    let mini = Mini::new(6, 10, 100);
    let txs = vec![
        mini.tx("x0", &[], &[("A", Some(b"0"))]),
        mini.tx("x1", &[], &[("B", Some(b"1"))]),
        mini.tx("x2", &[], &[("K", Some(b"v"))]),
    ];
    let block = mini.block(4, Digest::ZERO, txs);
    let state = apply_block(&WorldState::new(), &block, &[Valid, Valid, Valid]);
    assert_eq!(state.read_state("K"), Some((&b"v"[..], Version::new(4, 2))));

    let state = apply_block(&WorldState::new(), &block, &[Valid, Valid, MvccConflict]);
    assert!(state.read_state("K").is_none());
}

#[test]
fn delete_keeps_history_in_log() {
    let mini = Mini::new(7, 10, 100);
    let mut ledger = committed(&mini, 1);
    let v = ledger.state().version("K0");
    let prev = ledger.chain().last_header().unwrap().clone();
    ledger
        .commit(mini.block_after(&prev, vec![mini.tx("del", &[("K0", v)], &[("K0", None)])]))
        .unwrap();
    assert!(ledger.state().read_state("K0").is_none());
    let history = &ledger.chain().block(1).unwrap().data[0].payload.write_set[0];
    assert_eq!(history.key, "K0");
    assert_eq!(history.value.as_deref(), Some(&b"v"[..]));
}

#[test]
fn latest_write_wins_with_higher_version() {
    let mini = Mini::new(8, 10, 100);
    let mut ledger = committed(&mini, 0);
    for (i, value) in [b"one", b"two"].iter().enumerate() {
        let prev = ledger.chain().last_header().unwrap().clone();
        let tx = mini.tx(&format!("w{i}"), &[], &[("K", Some(&value[..]))]);
        ledger.commit(mini.block_after(&prev, vec![tx])).unwrap();
    }
    let (value, version) = ledger.state().read_state("K").map(|(v, n)| (v.to_vec(), n)).unwrap();
    assert_eq!(value, b"two");
    assert!(version > Version::new(1, 0));
    assert_eq!(version, Version::new(2, 0));
}

#[test]
fn genesis_replay_holds_only_config() {
    let mini = Mini::new(9, 10, 100);
    let state = replay(std::slice::from_ref(&mini.genesis)).unwrap();
    assert_eq!(state.keys().collect::<Vec<_>>(), [CONFIG_KEY]);
}

#[test]
fn persisted_ledger_reopens_identically() {
    let mini = Mini::new(10, 10, 100);
    let dir = tempfile::tempdir().unwrap();
    let live = {
        let mut ledger = Ledger::open(dir.path()).unwrap();
        assert!(ledger.is_persistent());
        ledger.commit(mini.genesis.clone()).unwrap();
        for n in 0..3 {
            let prev = ledger.chain().last_header().unwrap().clone();
            let tx = mini.tx(&format!("p{n}"), &[], &[("K", Some(format!("{n}").as_bytes()))]);
            ledger.commit(mini.block_after(&prev, vec![tx])).unwrap();
        }
        (ledger.chain().blocks().to_vec(), ledger.state())
    };
    let reopened = Ledger::open(dir.path()).unwrap();
    assert_eq!(reopened.chain().blocks(), &live.0[..]);
    assert_eq!(*reopened.state(), *live.1);
    let bytes = std::fs::read(dir.path().join(LOG_FILE)).unwrap();
    assert!(verify_log_bytes(&bytes).is_ok());
}

#[test]
fn torn_tail_is_dropped_on_open() {
    let mini = Mini::new(11, 10, 100);
    let dir = tempfile::tempdir().unwrap();
    {
        let mut ledger = Ledger::open(dir.path()).unwrap();
        ledger.commit(mini.genesis.clone()).unwrap();
        let prev = ledger.chain().last_header().unwrap().clone();
        ledger
            .commit(mini.block_after(&prev, vec![mini.tx("a", &[], &[("K", Some(b"1"))])]))
            .unwrap();
    }
    let log = dir.path().join(LOG_FILE);
    let clean_len = std::fs::metadata(&log).unwrap().len();
    OpenOptions::new()
        .append(true)
        .open(&log)
        .unwrap()
        .write_all(&[0, 0, 1, 0, b'{', b'"'])
        .unwrap();
    let ledger = Ledger::open(dir.path()).unwrap();
    assert_eq!(ledger.height(), 2);
    assert_eq!(std::fs::metadata(&log).unwrap().len(), clean_len);
}

#[test]
fn stale_snapshot_is_rebuilt() {
    let mini = Mini::new(12, 10, 100);
    let dir = tempfile::tempdir().unwrap();
    let state = {
        let mut ledger = Ledger::open(dir.path()).unwrap();
        ledger.commit(mini.genesis.clone()).unwrap();
        ledger.state()
    };
    std::fs::write(dir.path().join(SNAPSHOT_FILE), b"{}").unwrap();
    let ledger = Ledger::open(dir.path()).unwrap();
    assert_eq!(*ledger.state(), *state);
    let text = std::fs::read_to_string(dir.path().join(SNAPSHOT_FILE)).unwrap();
    assert!(text.contains(CONFIG_KEY));
}

#[test]
fn mid_log_corruption_refuses_open() {
    let mini = Mini::new(13, 10, 100);
    let dir = tempfile::tempdir().unwrap();
    {
        let mut ledger = Ledger::open(dir.path()).unwrap();
        ledger.commit(mini.genesis.clone()).unwrap();
        let prev = ledger.chain().last_header().unwrap().clone();
        ledger
            .commit(mini.block_after(&prev, vec![mini.tx("a", &[], &[("K", Some(b"1"))])]))
            .unwrap();
    }
    let log = dir.path().join(LOG_FILE);
    let mut bytes = std::fs::read(&log).unwrap();
    let at = bytes.len() / 3;
    bytes[at] ^= 0x01;
    std::fs::write(&log, &bytes).unwrap();
    let err = Ledger::open(dir.path()).unwrap_err();
    assert!(err.to_string().contains("CORRUPT_CHAIN"), "{err}");
    assert!(!verify_log_bytes(&bytes).is_ok());
}
