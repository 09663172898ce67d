//! Bitcoin-style Merkle trees over txids: pairs are hashed with double
//! SHA-256 and an odd level duplicates its last node.

use serde::{Deserialize, Serialize};

use crate::hash::{sha256d, Hash32};

use super::types::{BlockHeader, Txid};

fn parent(left: &Hash32, right: &Hash32) -> Hash32 {
    let mut buf = [0u8; 64];
    buf[..32].copy_from_slice(left.as_bytes());
    buf[32..].copy_from_slice(right.as_bytes());
    Hash32(sha256d(&buf))
}

/// Root over `leaves`; the empty tree has the all-zero root and a single
/// leaf is its own root.
pub fn merkle_root(leaves: &[Txid]) -> Hash32 {
    if leaves.is_empty() {
        return Hash32::ZERO;
    }
    let mut level = leaves.to_vec();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| parent(&pair[0], pair.get(1).unwrap_or(&pair[0])))
            .collect();
    }
    level[0]
}

/// Sibling path from a leaf to the root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerkleProof {
    pub index: u32,
    pub siblings: Vec<Hash32>,
}

impl MerkleProof {
    pub fn build(leaves: &[Txid], index: usize) -> Option<Self> {
        if index >= leaves.len() {
            return None;
        }
        let mut siblings = Vec::new();
        let mut level = leaves.to_vec();
        let mut i = index;
        while level.len() > 1 {
            let sibling = if i.is_multiple_of(2) { level.get(i + 1).unwrap_or(&level[i]) } else { &level[i - 1] };
            siblings.push(*sibling);
            level = level
                .chunks(2)
                .map(|pair| parent(&pair[0], pair.get(1).unwrap_or(&pair[0])))
                .collect();
            i /= 2;
        }
        Some(MerkleProof { index: index as u32, siblings })
    }

    pub fn root_for(&self, leaf: &Txid) -> Option<Hash32> {
        if self.siblings.len() < 32 && (self.index as u64) >> self.siblings.len() != 0 {
            return None;
        }
        let mut acc = *leaf;
        let mut i = self.index;
        for s in &self.siblings {
            acc = if i & 1 == 0 { parent(&acc, s) } else { parent(s, &acc) };
            i >>= 1;
        }
        Some(acc)
    }
}

/// True iff `proof` links `txid` to the Merkle root in `header`.
pub fn verify_inclusion(header: &BlockHeader, txid: &Txid, proof: &MerkleProof) -> bool {
    proof.root_for(txid) == Some(header.merkle_root)
}
