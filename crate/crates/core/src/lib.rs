//! Blockchain-anchored identity credentials: DLREP commitments and proofs,
//! a simulated UTXO ledger, fee economics, and the identity transactions
//! that tie them together.

pub mod codec;
pub mod dlrep;
pub mod economics;
pub mod group;
pub mod hash;
pub mod ledger;
pub mod protocol;
pub mod schnorr;

pub use group::{PrimeGroup, Secp256k1, ToyGroup};

pub type Commitment = dlrep::DlrepCommitment<Secp256k1>;
pub type Proof = dlrep::DlrepProof<Secp256k1>;
pub type Generators = dlrep::GeneratorSet<Secp256k1>;
pub type Statement = dlrep::DisclosureStatement<Secp256k1>;
pub type Attributes = dlrep::AttributeVector<Secp256k1>;
pub type Scalar = <Secp256k1 as PrimeGroup>::Scalar;
pub type KeyPair = schnorr::SigningKey<Secp256k1>;
