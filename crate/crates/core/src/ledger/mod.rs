//! In-memory UTXO ledger with blocks, Merkle inclusion proofs, forks and
//! longest-chain reorganization.

mod chain;
mod export;
pub mod merkle;
pub mod types;

use serde::Serialize;

pub use chain::{
    Allocation, Eviction, Genesis, Ledger, LedgerEvent, MempoolEntry, MinedBlock, OutputStatus, Spender, TxLocation,
    UtxoSet,
};
pub use export::{LedgerExport, EXPORT_SCHEMA_VERSION};
pub use merkle::{merkle_root, verify_inclusion, MerkleProof};
pub use types::{
    Address, Block, BlockHash, BlockHeader, OutPoint, Script, Transaction, TxInput, TxOutput, Txid,
    MAX_DATA_CARRIER_BYTES,
};

pub type BranchId = usize;

/// Reasons a transaction is refused by the mempool or evicted while mining.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxError {
    #[error("transaction has no inputs")]
    NoInputs,
    #[error("transaction has no outputs")]
    NoOutputs,
    #[error("input spends unknown outpoint {outpoint}")]
    UnknownOutpoint { outpoint: OutPoint },
    #[error("outpoint {outpoint} is already spent")]
    DoubleSpend { outpoint: OutPoint },
    #[error("input {input} carries an invalid signature")]
    BadSignature { input: usize },
    #[error("outputs ({outputs}) exceed inputs ({inputs})")]
    NegativeFee { inputs: u64, outputs: u64 },
    #[error("output {index} of {value} sat is below the dust limit {dust}")]
    DustOutput { index: usize, value: u64, dust: u64 },
    #[error("data carrier of {len} bytes exceeds {max}")]
    OversizedDataCarrier { len: usize, max: usize },
    #[error("data carrier output {index} carries {value} sat")]
    NonzeroDataCarrierValue { index: usize, value: u64 },
    #[error("more than one data carrier output")]
    MultipleDataCarriers,
    #[error("outpoint {outpoint} is a data carrier and cannot be spent")]
    UnspendableOutput { outpoint: OutPoint },
    #[error("transaction {txid} is already known")]
    DuplicateTransaction { txid: Txid },
    #[error("value overflow")]
    ValueOverflow,
}

impl TxError {
    pub fn kind(&self) -> &'static str {
        match self {
            TxError::NoInputs => "no_inputs",
            TxError::NoOutputs => "no_outputs",
            TxError::UnknownOutpoint { .. } => "unknown_outpoint",
            TxError::DoubleSpend { .. } => "double_spend",
            TxError::BadSignature { .. } => "bad_signature",
            TxError::NegativeFee { .. } => "negative_fee",
            TxError::DustOutput { .. } => "dust_output",
            TxError::OversizedDataCarrier { .. } => "oversized_data_carrier",
            TxError::NonzeroDataCarrierValue { .. } => "nonzero_data_carrier_value",
            TxError::MultipleDataCarriers => "multiple_data_carriers",
            TxError::UnspendableOutput { .. } => "unspendable_output",
            TxError::DuplicateTransaction { .. } => "duplicate_transaction",
            TxError::ValueOverflow => "value_overflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("no block at height {0} on the active chain")]
    UnknownHeight(u32),
    #[error("no branch {0}")]
    UnknownBranch(BranchId),
    #[error("outpoint {0} was never created on this chain")]
    UnknownOutpoint(OutPoint),
    #[error("import failed: {0}")]
    Import(String),
}

impl LedgerError {
    pub fn kind(&self) -> &'static str {
        match self {
            LedgerError::UnknownHeight(_) => "unknown_height",
            LedgerError::UnknownBranch(_) => "unknown_branch",
            LedgerError::UnknownOutpoint(_) => "unknown_outpoint",
            LedgerError::Import(_) => "import",
        }
    }
}
