use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{put_u32, put_u64, put_u8, DecodeError, Reader};
use crate::group::Secp256k1;
use crate::hash::{hash160, hex_bytes, sha256, sha256d, Hash32, HexLengthError};
use crate::schnorr::SigningKey;

pub type Txid = Hash32;
pub type BlockHash = Hash32;

/// Largest data-carrier payload a standard transaction may hold.
pub const MAX_DATA_CARRIER_BYTES: usize = 80;

/// Hash160 of a compressed public key.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub fn from_public_key(encoded: &[u8]) -> Self {
        Address(hash160(encoded))
    }

    pub fn of_key(key: &SigningKey<Secp256k1>) -> Self {
        Self::from_public_key(&key.public_bytes())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.to_hex())
    }
}

impl FromStr for Address {
    type Err = HexLengthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|_| HexLengthError { expected: 20 })?;
        Ok(Address(bytes.try_into().map_err(|_| HexLengthError { expected: 20 })?))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Locking condition of an output.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Script {
    PayToAddress { address: Address },
    /// Spendable by a signature from either key; the spend records which.
    Multisig1of2 { keys: [Address; 2] },
    /// Unspendable payload output.
    DataCarrier {
        #[serde(with = "hex_bytes")]
        payload: Vec<u8>,
    },
}

impl Script {
    pub fn pay_to(address: Address) -> Self {
        Script::PayToAddress { address }
    }

    pub fn multisig(a: Address, b: Address) -> Self {
        Script::Multisig1of2 { keys: [a, b] }
    }

    pub fn data(payload: impl Into<Vec<u8>>) -> Self {
        Script::DataCarrier { payload: payload.into() }
    }

    pub fn is_data_carrier(&self) -> bool {
        matches!(self, Script::DataCarrier { .. })
    }

    pub fn payload(&self) -> Option<&[u8]> {
        match self {
            Script::DataCarrier { payload } => Some(payload),
            _ => None,
        }
    }

    pub fn address(&self) -> Option<Address> {
        match self {
            Script::PayToAddress { address } => Some(*address),
            _ => None,
        }
    }

    /// Address a given signer index must hash to, if the index is valid.
    pub fn signer_address(&self, signer: u8) -> Option<Address> {
        match (self, signer) {
            (Script::PayToAddress { address }, 0) => Some(*address),
            (Script::Multisig1of2 { keys }, 0 | 1) => Some(keys[signer as usize]),
            _ => None,
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Script::PayToAddress { address } => {
                put_u8(out, 0);
                out.extend_from_slice(&address.0);
            }
            Script::Multisig1of2 { keys } => {
                put_u8(out, 1);
                out.extend_from_slice(&keys[0].0);
                out.extend_from_slice(&keys[1].0);
            }
            Script::DataCarrier { payload } => {
                put_u8(out, 2);
                put_u32(out, payload.len() as u32);
                out.extend_from_slice(payload);
            }
        }
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let addr = |r: &mut Reader<'_>| -> Result<Address, DecodeError> {
            Ok(Address(r.take(20, "address")?.try_into().unwrap()))
        };
        match r.u8("script tag")? {
            0 => Ok(Script::PayToAddress { address: addr(r)? }),
            1 => Ok(Script::Multisig1of2 { keys: [addr(r)?, addr(r)?] }),
            2 => Ok(Script::DataCarrier { payload: r.bytes("payload")?.to_vec() }),
            _ => Err(DecodeError { offset: r.position(), what: "unknown script tag" }),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Txid,
    pub vout: u32,
}

impl OutPoint {
    pub fn new(txid: Txid, vout: u32) -> Self {
        OutPoint { txid, vout }
    }

    /// 36 bytes: txid then big-endian index.
    pub fn encode(&self) -> [u8; 36] {
        let mut out = [0u8; 36];
        out[..32].copy_from_slice(self.txid.as_bytes());
        out[32..].copy_from_slice(&self.vout.to_be_bytes());
        out
    }
}

impl fmt::Display for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.txid, self.vout)
    }
}

impl fmt::Debug for OutPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OutPoint({self})")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxOutput {
    pub value: u64,
    pub script: Script,
}

impl TxOutput {
    pub fn new(value: u64, script: Script) -> Self {
        TxOutput { value, script }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxInput {
    pub outpoint: OutPoint,
    /// Which key of the spent script signed: always 0 for pay-to-address.
    pub signer: u8,
    #[serde(with = "hex_bytes")]
    pub public_key: Vec<u8>,
    #[serde(with = "hex_bytes")]
    pub signature: Vec<u8>,
}

impl TxInput {
    pub fn unsigned(outpoint: OutPoint) -> Self {
        TxInput { outpoint, signer: 0, public_key: Vec::new(), signature: Vec::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
}

const TX_VERSION: u32 = 1;
const SIGHASH_DOMAIN: &[u8] = b"chainid/sighash/v1";

impl Transaction {
    pub fn new(inputs: Vec<TxInput>, outputs: Vec<TxOutput>) -> Self {
        Transaction { inputs, outputs }
    }

    /// Canonical body encoding; the txid is its double SHA-256.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, TX_VERSION);
        put_u32(&mut out, self.inputs.len() as u32);
        for input in &self.inputs {
            out.extend_from_slice(&input.outpoint.encode());
            put_u8(&mut out, input.signer);
            put_u8(&mut out, input.public_key.len() as u8);
            out.extend_from_slice(&input.public_key);
            put_u8(&mut out, input.signature.len() as u8);
            out.extend_from_slice(&input.signature);
        }
        self.encode_outputs(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u32("version")? != TX_VERSION {
            return Err(DecodeError { offset: 0, what: "unsupported version" });
        }
        let n = r.u32("input count")?;
        let mut inputs = Vec::new();
        for _ in 0..n {
            let txid = Hash32(r.take(32, "txid")?.try_into().unwrap());
            let vout = r.u32("vout")?;
            let signer = r.u8("signer")?;
            let pk_len = r.u8("public key length")? as usize;
            let public_key = r.take(pk_len, "public key")?.to_vec();
            let sig_len = r.u8("signature length")? as usize;
            let signature = r.take(sig_len, "signature")?.to_vec();
            inputs.push(TxInput { outpoint: OutPoint::new(txid, vout), signer, public_key, signature });
        }
        let m = r.u32("output count")?;
        let mut outputs = Vec::new();
        for _ in 0..m {
            let value = r.u64("value")?;
            outputs.push(TxOutput { value, script: Script::read(&mut r)? });
        }
        r.finish("trailing bytes after transaction")?;
        Ok(Transaction { inputs, outputs })
    }

    fn encode_outputs(&self, out: &mut Vec<u8>) {
        put_u32(out, self.outputs.len() as u32);
        for output in &self.outputs {
            put_u64(out, output.value);
            output.script.encode_into(out);
        }
    }

    pub fn txid(&self) -> Txid {
        Hash32(sha256d(&self.encode()))
    }

    /// Digest signed by input `index`: all outpoints, all outputs, and the
    /// outpoint being spent. Keys and signatures are excluded.
    pub fn sighash(&self, index: usize) -> [u8; 32] {
        let mut out = SIGHASH_DOMAIN.to_vec();
        put_u32(&mut out, TX_VERSION);
        put_u32(&mut out, self.inputs.len() as u32);
        for input in &self.inputs {
            out.extend_from_slice(&input.outpoint.encode());
        }
        self.encode_outputs(&mut out);
        out.extend_from_slice(&self.inputs[index].outpoint.encode());
        sha256(&out)
    }

    /// Signs input `index` with `key`, recording `signer` as the key slot.
    pub fn sign_input(&mut self, index: usize, key: &SigningKey<Secp256k1>, signer: u8) {
        let digest = self.sighash(index);
        let input = &mut self.inputs[index];
        input.signer = signer;
        input.public_key = key.public_bytes();
        input.signature = key.sign(&digest).to_bytes();
    }

    pub fn output_total(&self) -> Option<u64> {
        self.outputs.iter().try_fold(0u64, |acc, o| acc.checked_add(o.value))
    }

    pub fn data_carrier(&self) -> Option<(usize, &[u8])> {
        self.outputs.iter().enumerate().find_map(|(i, o)| o.script.payload().map(|p| (i, p)))
    }

    pub fn is_coinbase(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// 80-byte block header.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub version: u32,
    pub prev: BlockHash,
    pub merkle_root: Hash32,
    pub height: u32,
    pub time: u32,
    pub nonce: u32,
}

impl BlockHeader {
    pub const ENCODED_LEN: usize = 80;

    pub fn encode(&self) -> [u8; 80] {
        let mut out = [0u8; 80];
        out[..4].copy_from_slice(&self.version.to_be_bytes());
        out[4..36].copy_from_slice(self.prev.as_bytes());
        out[36..68].copy_from_slice(self.merkle_root.as_bytes());
        out[68..72].copy_from_slice(&self.height.to_be_bytes());
        out[72..76].copy_from_slice(&self.time.to_be_bytes());
        out[76..80].copy_from_slice(&self.nonce.to_be_bytes());
        out
    }

    pub fn hash(&self) -> BlockHash {
        Hash32(sha256d(&self.encode()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> BlockHash {
        self.header.hash()
    }

    pub fn txids(&self) -> Vec<Txid> {
        self.transactions.iter().map(Transaction::txid).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Transaction {
        let key = SigningKey::<Secp256k1>::from_seed(b"k");
        let mut tx = Transaction::new(
            vec![TxInput::unsigned(OutPoint::new(Hash32::of(b"prev"), 1))],
            vec![
                TxOutput::new(1000, Script::pay_to(Address::of_key(&key))),
                TxOutput::new(600, Script::multisig(Address([1; 20]), Address([2; 20]))),
                TxOutput::new(0, Script::data(vec![7u8; 40])),
            ],
        );
        tx.sign_input(0, &key, 0);
        tx
    }

    #[test]
    fn encoding_roundtrip() {
        let tx = sample();
        assert_eq!(Transaction::decode(&tx.encode()).unwrap(), tx);
        let json = serde_json::to_string(&tx).unwrap();
        assert_eq!(serde_json::from_str::<Transaction>(&json).unwrap(), tx);
    }

    #[test]
    fn sighash_excludes_signatures_but_commits_to_outputs() {
        let mut tx = sample();
        let before = tx.sighash(0);
        tx.inputs[0].signature = vec![];
        assert_eq!(tx.sighash(0), before);
        tx.outputs[0].value += 1;
        assert_ne!(tx.sighash(0), before);
    }

    #[test]
    fn header_is_80_bytes_and_hash_commits_to_fields() {
        let h = BlockHeader { version: 1, prev: Hash32::ZERO, merkle_root: Hash32::of(b"r"), height: 3, time: 3, nonce: 0 };
        assert_eq!(h.encode().len(), BlockHeader::ENCODED_LEN);
        let mut g = h.clone();
        g.height = 4;
        assert_ne!(h.hash(), g.hash());
    }

    #[test]
    fn signer_addresses() {
        let a = Address([1; 20]);
        let b = Address([2; 20]);
        let ms = Script::multisig(a, b);
        assert_eq!(ms.signer_address(0), Some(a));
        assert_eq!(ms.signer_address(1), Some(b));
        assert_eq!(ms.signer_address(2), None);
        assert_eq!(Script::pay_to(a).signer_address(1), None);
        assert_eq!(Script::data(vec![]).signer_address(0), None);
    }
}
