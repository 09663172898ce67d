//! Data-carrier layouts used by identity transactions.

use serde::{Deserialize, Serialize};

use crate::group::{PrimeGroup, Secp256k1};
use crate::hash::Hash32;

pub const PUBLISH_TAG: u8 = b'P';
pub const REQUEST_TAG: u8 = b'R';
pub const REQUEST_DOUBLE_TAG: u8 = b'D';
pub const REVOKE_TAG: u8 = b'X';
pub const MAX_LOCATOR_BYTES: usize = 30;

type Element = <Secp256k1 as PrimeGroup>::Element;

/// `P || h (33) || N (u16)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublishPayload {
    pub commitment: Element,
    pub uses: u16,
}

impl PublishPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![PUBLISH_TAG];
        out.extend(Secp256k1::encode(&self.commitment));
        out.extend(self.uses.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let w = Secp256k1::ELEMENT_BYTES;
        if bytes.len() != 1 + w + 2 || bytes[0] != PUBLISH_TAG {
            return None;
        }
        let commitment = Secp256k1::decode(&bytes[1..1 + w])?;
        if Secp256k1::is_identity(&commitment) {
            return None;
        }
        Some(PublishPayload { commitment, uses: u16::from_be_bytes([bytes[1 + w], bytes[2 + w]]) })
    }
}

/// Pointer to an off-chain proof: its SHA-256 and a short locator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofRef {
    pub hash: Hash32,
    pub locator: String,
}

impl ProofRef {
    /// `tag || hash (32) || locator (<= 30)`.
    pub fn encode(&self, tag: u8) -> Vec<u8> {
        let mut out = vec![tag];
        out.extend_from_slice(self.hash.as_bytes());
        out.extend_from_slice(self.locator.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8], tag: u8) -> Option<Self> {
        if bytes.len() < 33 || bytes.len() > 33 + MAX_LOCATOR_BYTES || bytes[0] != tag {
            return None;
        }
        let hash = Hash32(bytes[1..33].try_into().ok()?);
        let locator = String::from_utf8(bytes[33..].to_vec()).ok()?;
        Some(ProofRef { hash, locator })
    }

    /// Locator derived from the hash: the first 30 hex digits.
    pub fn default_locator(hash: &Hash32) -> String {
        hash.to_hex()[..MAX_LOCATOR_BYTES].to_string()
    }
}
