//! Deterministic JSON snapshot of a ledger. Importing replays and
//! re-validates every block, so a snapshot cannot smuggle in invalid state.

use serde::{Deserialize, Serialize};

use crate::economics::FeeSchedule;

use super::chain::Ledger;
use super::types::{Block, BlockHash, BlockHeader, Transaction, Txid};
use super::{BranchId, LedgerError};

pub const EXPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedTx {
    pub txid: Txid,
    pub tx: Transaction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedBlock {
    pub hash: BlockHash,
    pub header: BlockHeader,
    pub transactions: Vec<ExportedTx>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportedMempoolEntry {
    pub txid: Txid,
    pub branch: BranchId,
    pub tx: Transaction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerExport {
    pub schema_version: u32,
    pub fee_schedule: FeeSchedule,
    /// Every block ever mined, parents before children.
    pub blocks: Vec<ExportedBlock>,
    pub branch_tips: Vec<BlockHash>,
    pub active_branch: BranchId,
    pub mempool: Vec<ExportedMempoolEntry>,
}

fn exported_tx(tx: &Transaction) -> ExportedTx {
    ExportedTx { txid: tx.txid(), tx: tx.clone() }
}

fn import_err(msg: impl Into<String>) -> LedgerError {
    LedgerError::Import(msg.into())
}

impl Ledger {
    pub fn export(&self) -> LedgerExport {
        LedgerExport {
            schema_version: EXPORT_SCHEMA_VERSION,
            fee_schedule: self.schedule,
            blocks: self
                .blocks
                .iter()
                .map(|b| ExportedBlock {
                    hash: b.hash,
                    header: b.block.header.clone(),
                    transactions: b.block.transactions.iter().map(exported_tx).collect(),
                })
                .collect(),
            branch_tips: self.branches.iter().map(|b| self.blocks[b.tip].hash).collect(),
            active_branch: self.active,
            mempool: self
                .mempool
                .iter()
                .map(|e| ExportedMempoolEntry { txid: e.txid, branch: e.branch, tx: e.tx.clone() })
                .collect(),
        }
    }

    pub fn export_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("ledger export serializes")
    }

    pub fn import(snapshot: &LedgerExport) -> Result<Ledger, LedgerError> {
        if snapshot.schema_version != EXPORT_SCHEMA_VERSION {
            return Err(import_err(format!("unsupported schema version {}", snapshot.schema_version)));
        }
        snapshot.fee_schedule.validate().map_err(|e| import_err(e.to_string()))?;
        let (first, rest) = snapshot.blocks.split_first().ok_or_else(|| import_err("no genesis block"))?;
        let block_of = |b: &ExportedBlock| -> Result<Block, LedgerError> {
            for t in &b.transactions {
                if t.tx.txid() != t.txid {
                    return Err(import_err(format!("txid {} does not match its transaction", t.txid)));
                }
            }
            if b.header.hash() != b.hash {
                return Err(import_err(format!("block hash {} does not match its header", b.hash)));
            }
            Ok(Block { header: b.header.clone(), transactions: b.transactions.iter().map(|t| t.tx.clone()).collect() })
        };

        let genesis = block_of(first)?;
        if genesis.header.height != 0 || genesis.transactions.iter().any(|t| !t.is_coinbase()) {
            return Err(import_err("first block is not a genesis block"));
        }
        if genesis.header.merkle_root != super::merkle_root(&genesis.txids()) {
            return Err(import_err("genesis merkle root mismatch"));
        }
        let mut ledger = Ledger::from_parts(snapshot.fee_schedule, genesis);
        for b in rest {
            let block = block_of(b)?;
            let parent = ledger
                .block_index(&block.header.prev)
                .ok_or_else(|| import_err(format!("block {} has no known parent", b.hash)))?;
            ledger.import_block(block, parent).map_err(import_err)?;
        }

        let tips = snapshot
            .branch_tips
            .iter()
            .map(|h| ledger.block_index(h).ok_or_else(|| import_err(format!("unknown branch tip {h}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if snapshot.active_branch >= tips.len() {
            return Err(import_err("active branch out of range"));
        }
        ledger.set_branches(tips, snapshot.active_branch);
        for e in &snapshot.mempool {
            if e.branch >= ledger.branch_count() {
                return Err(import_err("mempool entry targets an unknown branch"));
            }
            let txid = ledger.submit_to(e.branch, e.tx.clone()).map_err(|err| import_err(format!("mempool {}: {err}", e.txid)))?;
            if txid != e.txid {
                return Err(import_err(format!("txid {} does not match its transaction", e.txid)));
            }
        }
        ledger.drain_events();
        Ok(ledger)
    }

    pub fn import_json(json: &str) -> Result<Ledger, LedgerError> {
        let snapshot: LedgerExport = serde_json::from_str(json).map_err(|e| import_err(e.to_string()))?;
        Self::import(&snapshot)
    }
}
