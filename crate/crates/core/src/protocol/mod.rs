//! Identity lifecycle on the ledger: issuer setup, enrollment,
//! authentication requests, acceptance, revocation and verification.

mod actor;
mod ops;
pub mod payload;
mod report;
pub mod shape;
pub mod source;
mod store;
mod verify;

pub use actor::{exact_coin, wallet_spend, Actor, Credential, IdentityRecord, IssuerProfile};
pub use ops::{
    accept, accept_double, build_request, build_request_double, current_token, enroll, read_generators, revoke, setup,
    Disclosure, Enrollment, FieldRef, RequestReceipt,
};
pub use payload::{ProofRef, PublishPayload};
pub use report::{lightweight_verify, reputation_report, ControlClaim, LightweightRejection, LightweightVerdict, ReportRow};
pub use shape::{classify_spend, parse_publish, PublishInfo, SpendKind};
pub use source::{ChainSource, Explorer, ExplorerFaults, FullLedger, HeaderOnly, InclusionProvider, SourceError, SourceMode};
pub use store::{ProofStore, StoreError};
pub use verify::{
    identity_status, verify_request, Demand, IdentityStatus, Rejection, TokenChain, TokenState, Verdict, Verifier,
};

use crate::dlrep::DlrepError;
use crate::economics::EconomicsError;
use crate::ledger::{Address, OutPoint, TxError, Txid};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("insufficient funds: need {needed} sat, have {available}")]
    InsufficientFunds { needed: u64, available: u64 },
    #[error("blinded element is not a valid group element")]
    InvalidBlindedElement,
    #[error("use limit {0} does not fit the publish payload")]
    UseLimitTooLarge(u32),
    #[error("attributes do not open the enrolled commitment")]
    CommitmentMismatch,
    #[error("token {outpoint} is already spent")]
    TokenSpent { outpoint: OutPoint },
    #[error("token of {token_value} sat cannot fund another use ({needed} needed)")]
    UseLimitExceeded { token_value: u64, needed: u64 },
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("no identity at position {0}")]
    UnknownIdentity(usize),
    #[error("{0} holds neither key of the token")]
    NotAKeyHolder(Address),
    #[error("transaction {0} not found")]
    UnknownTransaction(Txid),
    #[error("{0} is not an authentication request for this provider")]
    NotARequest(Txid),
    #[error("output {0} is already spent")]
    OutputSpent(OutPoint),
    #[error("generator publication: {0}")]
    Publication(String),
    #[error(transparent)]
    Dlrep(#[from] DlrepError),
    #[error("transaction refused: {0}")]
    Tx(#[from] TxError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Economics(#[from] EconomicsError),
}

impl ProtocolError {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolError::InsufficientFunds { .. } => "insufficient_funds",
            ProtocolError::InvalidBlindedElement => "invalid_blinded_element",
            ProtocolError::UseLimitTooLarge(_) => "use_limit_too_large",
            ProtocolError::CommitmentMismatch => "commitment_mismatch",
            ProtocolError::TokenSpent { .. } => "token_spent",
            ProtocolError::UseLimitExceeded { .. } => "use_limit_exceeded",
            ProtocolError::UnknownField(_) => "unknown_field",
            ProtocolError::UnknownIdentity(_) => "unknown_identity",
            ProtocolError::NotAKeyHolder(_) => "not_a_key_holder",
            ProtocolError::UnknownTransaction(_) => "unknown_transaction",
            ProtocolError::NotARequest(_) => "not_a_request",
            ProtocolError::OutputSpent(_) => "output_spent",
            ProtocolError::Publication(_) => "publication",
            ProtocolError::Dlrep(_) => "dlrep",
            ProtocolError::Tx(e) => e.kind(),
            ProtocolError::Store(_) => "proof_store",
            ProtocolError::Source(_) => "source",
            ProtocolError::Economics(_) => "economics",
        }
    }
}
