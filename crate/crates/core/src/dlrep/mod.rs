//! Discrete-log representation commitments and selective-disclosure proofs.
//!
//! An identity is a vector of scalars `(X0, X1, ..., Xn)` committed as
//! `h = g0^X0 * g1^X1 * ... * gn^Xn`. Index 0 is a blinding exponent chosen by
//! the holder. Proofs show knowledge of a representation of one or more
//! commitments while revealing chosen attributes and proving equality
//! between hidden attributes, made non-interactive with a hash challenge
//! that is bound to a caller-supplied context.

mod commitment;
mod generators;
mod proof;
mod statement;

pub use commitment::{blind_contribution, combine, commit, issue_commitment, AttributeVector, DlrepCommitment};
pub use generators::{attribute_scalar, GeneratorSet, BLINDING_LABEL};
pub use proof::{prove, prove_deterministic, prove_with_nonces, verify, DlrepProof};
pub use statement::{AttrRef, DisclosureStatement, EqualityLink, Revelation};

use crate::codec::DecodeError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DlrepError {
    #[error("expected {expected} attributes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid generator set: {0}")]
    InvalidGenerators(&'static str),
    #[error("generator sets overlap; refusing to combine")]
    OverlappingGenerators,
    #[error("invalid group element encoding")]
    InvalidElement,
    #[error("blinding attribute {0:?} may not be revealed or linked")]
    BlindingDisclosed(AttrRef),
    #[error("attribute reference {0:?} out of range")]
    IndexOutOfRange(AttrRef),
    #[error("attribute {0:?} is referenced more than once")]
    DuplicateReference(AttrRef),
    #[error("attribute {0:?} is both revealed and linked")]
    LinkTouchesRevealed(AttrRef),
    #[error("revealed value for {0:?} does not match the witness")]
    RevealedValueMismatch(AttrRef),
    #[error("equality link {0:?} does not hold for the witness")]
    LinkMismatch(EqualityLink),
    #[error("witness does not open commitment {0}")]
    WitnessMismatch(usize),
    #[error("wrong number of nonces: expected {expected}, got {got}")]
    NonceCount { expected: usize, got: usize },
    #[error("proof is for a different statement")]
    StatementMismatch,
    #[error("malformed proof: {0}")]
    Malformed(String),
    #[error("challenge does not match; proof rejected")]
    ChallengeMismatch,
}

impl From<DecodeError> for DlrepError {
    fn from(e: DecodeError) -> Self {
        DlrepError::Malformed(e.to_string())
    }
}

impl DlrepError {
    /// True for errors that stem from undecodable or structurally invalid
    /// input rather than from a well-formed proof that fails the check.
    pub fn is_malformed(&self) -> bool {
        matches!(self, DlrepError::Malformed(_))
    }
}
