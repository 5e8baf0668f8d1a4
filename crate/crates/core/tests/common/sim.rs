//! Runs the travel contract directly against a world state, one
//! transaction per block, without endorsement or ordering.

use std::time::Duration;

use passchain_core::chaincode::{dispatch, ChaincodeError, ChaincodeStub, Mode, TravelConfig, TravelContract};
use passchain_core::digest::Digest;
use passchain_core::identity::{Certificate, Signature};
use passchain_core::ledger::{
    apply_block, Block, BlockHeader, BlockMetadata, ReadEntry, TransactionEnvelope, TxPayload,
    ValidationCode, WorldState, WriteEntry,
};
use passchain_core::network::Deployment;
use passchain_core::time::Timestamp;

pub struct Execution {
    pub result: Result<Vec<u8>, ChaincodeError>,
    pub reads: Vec<ReadEntry>,
    pub writes: Vec<WriteEntry>,
}

pub struct Sim {
    pub contract: TravelContract,
    pub state: WorldState,
    pub next_block: u64,
    pub now: Timestamp,
}

impl Sim {
    pub fn from_deployment(d: &Deployment) -> Self {
        let msp = d.manifest.passport_msp().to_owned();
        let (state, height) = d
            .network
            .with_peer(&msp, |p| ((*p.state()).clone(), p.height()))
            .unwrap();
        Sim {
            contract: TravelContract::new(TravelConfig::new(msp)),
            state,
            next_block: height,
            now: d.network.now(),
        }
    }

    pub fn execute(&self, caller: &Certificate, mode: Mode, function: &str, args: &[String]) -> Execution {
        let mut stub = ChaincodeStub::new(&self.state, caller, self.now, mode);
        let result = dispatch(&self.contract, function, args, &mut stub);
        let (reads, writes) = stub.into_rwset();
        Execution { result, reads, writes }
    }

    /// Executes and, for a successful invoke, commits the writes in a block
    /// of its own. The clock moves one second per call.
    pub fn call(&mut self, caller: &Certificate, function: &str, args: &[&str]) -> Result<serde_json::Value, ChaincodeError> {
        let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let exec = self.execute(caller, Mode::Invoke, function, &args);
        let bytes = exec.result?;
        if !exec.writes.is_empty() {
            self.commit(caller, function, &args, exec.writes);
        }
        self.now = self.now.saturating_add(Duration::from_secs(1));
        Ok(serde_json::from_slice(&bytes).unwrap())
    }

    pub fn commit(&mut self, caller: &Certificate, function: &str, args: &[String], writes: Vec<WriteEntry>) {
        let tx = TransactionEnvelope {
            payload: TxPayload {
                tx_id: format!("sim{}", self.next_block),
                channel_id: "sim".into(),
                chaincode_name: "travel".into(),
                function: function.into(),
                args: args.to_vec(),
                read_set: vec![],
                write_set: writes,
                timestamp: self.now,
            },
            creator: caller.clone(),
            endorsements: vec![],
        };
        let block = Block {
            header: BlockHeader {
                number: self.next_block,
                prev_hash: Digest::ZERO,
                data_hash: Digest::ZERO,
            },
            data: vec![tx],
            metadata: BlockMetadata {
                validation_flags: vec![ValidationCode::Valid],
                orderer_signature: Signature::from_bytes(vec![]),
            },
        };
        self.state = apply_block(&self.state, &block, &[ValidationCode::Valid]);
        self.next_block += 1;
    }

    pub fn query(&self, caller: &Certificate, function: &str, args: &[&str]) -> Result<serde_json::Value, ChaincodeError> {
        let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        let exec = self.execute(caller, Mode::Query, function, &args);
        assert!(exec.writes.is_empty());
        Ok(serde_json::from_slice(&exec.result?).unwrap())
    }
}
