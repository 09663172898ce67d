//! Read-only views of confirmed chain state used by verifiers.

use serde::{Deserialize, Serialize};

use crate::ledger::{verify_inclusion, BlockHeader, Ledger, MerkleProof, OutPoint, Script, Transaction, Txid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    FullLedger,
    HeaderOnly,
    Explorer,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SourceError {
    #[error("source unavailable: {0}")]
    Unavailable(String),
    #[error("source returned unverifiable data: {0}")]
    Forged(String),
}

/// A confirmed transaction and the height of its block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourcedTx {
    pub txid: Txid,
    pub tx: Transaction,
    pub height: u32,
}

pub trait ChainSource {
    fn mode(&self) -> SourceMode;
    fn transaction(&self, txid: &Txid) -> Result<Option<SourcedTx>, SourceError>;
    /// Confirmed transaction spending `outpoint`, if any.
    fn spender(&self, outpoint: &OutPoint) -> Result<Option<SourcedTx>, SourceError>;
    /// Confirmed transactions with an output locked by `script`, in chain order.
    fn paying(&self, script: &Script) -> Result<Vec<SourcedTx>, SourceError>;
}

fn sourced(ledger: &Ledger, txid: &Txid) -> Option<SourcedTx> {
    ledger.transaction(txid).map(|loc| SourcedTx { txid: *txid, tx: loc.tx.clone(), height: loc.height })
}

fn spender_of(ledger: &Ledger, outpoint: &OutPoint) -> Option<SourcedTx> {
    let spender = ledger.find_spender(outpoint).ok()??;
    sourced(ledger, &spender.txid)
}

/// Direct reads of the active chain.
#[derive(Clone, Copy)]
pub struct FullLedger<'a>(pub &'a Ledger);

impl ChainSource for FullLedger<'_> {
    fn mode(&self) -> SourceMode {
        SourceMode::FullLedger
    }

    fn transaction(&self, txid: &Txid) -> Result<Option<SourcedTx>, SourceError> {
        Ok(sourced(self.0, txid))
    }

    fn spender(&self, outpoint: &OutPoint) -> Result<Option<SourcedTx>, SourceError> {
        Ok(spender_of(self.0, outpoint))
    }

    fn paying(&self, script: &Script) -> Result<Vec<SourcedTx>, SourceError> {
        Ok(self.0.transactions_paying(script).iter().filter_map(|(txid, _)| sourced(self.0, txid)).collect())
    }
}

/// A transaction with the Merkle path placing it in the block at `height`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProvidedTx {
    pub tx: Transaction,
    pub height: u32,
    pub proof: MerkleProof,
}

/// Untrusted peer answering queries for a header-only client.
pub trait InclusionProvider {
    fn provide(&self, txid: &Txid) -> Option<ProvidedTx>;
    fn provide_spender(&self, outpoint: &OutPoint) -> Option<ProvidedTx>;
    fn provide_paying(&self, script: &Script) -> Vec<ProvidedTx>;
}

impl InclusionProvider for Ledger {
    fn provide(&self, txid: &Txid) -> Option<ProvidedTx> {
        let loc = self.transaction(txid)?;
        let (_, proof) = self.inclusion_proof(txid)?;
        Some(ProvidedTx { tx: loc.tx.clone(), height: loc.height, proof })
    }

    fn provide_spender(&self, outpoint: &OutPoint) -> Option<ProvidedTx> {
        let spender = self.find_spender(outpoint).ok()??;
        self.provide(&spender.txid)
    }

    fn provide_paying(&self, script: &Script) -> Vec<ProvidedTx> {
        self.transactions_paying(script).iter().filter_map(|(txid, _)| self.provide(txid)).collect()
    }
}

/// Header-chain client: holds only block headers and checks every
/// transaction it is handed against them. Absence claims (no spender, no
/// further payments) are taken from the provider on trust.
pub struct HeaderOnly<'a> {
    headers: Vec<BlockHeader>,
    provider: &'a dyn InclusionProvider,
}

impl<'a> HeaderOnly<'a> {
    /// Fails if the headers do not form a chain from a genesis header.
    pub fn new(headers: Vec<BlockHeader>, provider: &'a dyn InclusionProvider) -> Result<Self, SourceError> {
        for (i, h) in headers.iter().enumerate() {
            if h.height as usize != i {
                return Err(SourceError::Forged(format!("header {i} claims height {}", h.height)));
            }
            if i > 0 && h.prev != headers[i - 1].hash() {
                return Err(SourceError::Forged(format!("header {i} does not link to its predecessor")));
            }
        }
        Ok(HeaderOnly { headers, provider })
    }

    /// Header client synced to `ledger`'s active chain, using it as provider.
    pub fn synced(ledger: &'a Ledger) -> Self {
        Self::new(ledger.headers(), ledger).expect("ledger headers form a chain")
    }

    fn check(&self, provided: ProvidedTx) -> Result<SourcedTx, SourceError> {
        let txid = provided.tx.txid();
        let header = self
            .headers
            .get(provided.height as usize)
            .ok_or_else(|| SourceError::Forged(format!("no header at height {}", provided.height)))?;
        if !verify_inclusion(header, &txid, &provided.proof) {
            return Err(SourceError::Forged(format!("inclusion proof for {txid} does not match header")));
        }
        Ok(SourcedTx { txid, tx: provided.tx, height: provided.height })
    }
}

impl ChainSource for HeaderOnly<'_> {
    fn mode(&self) -> SourceMode {
        SourceMode::HeaderOnly
    }

    fn transaction(&self, txid: &Txid) -> Result<Option<SourcedTx>, SourceError> {
        let Some(provided) = self.provider.provide(txid) else { return Ok(None) };
        let checked = self.check(provided)?;
        if checked.txid != *txid {
            return Err(SourceError::Forged(format!("asked for {txid}, got {}", checked.txid)));
        }
        Ok(Some(checked))
    }

    fn spender(&self, outpoint: &OutPoint) -> Result<Option<SourcedTx>, SourceError> {
        let Some(provided) = self.provider.provide_spender(outpoint) else { return Ok(None) };
        let checked = self.check(provided)?;
        if !checked.tx.inputs.iter().any(|i| i.outpoint == *outpoint) {
            return Err(SourceError::Forged(format!("{} does not spend {outpoint}", checked.txid)));
        }
        Ok(Some(checked))
    }

    fn paying(&self, script: &Script) -> Result<Vec<SourcedTx>, SourceError> {
        let mut out = Vec::new();
        for provided in self.provider.provide_paying(script) {
            let checked = self.check(provided)?;
            if !checked.tx.outputs.iter().any(|o| &o.script == script) {
                return Err(SourceError::Forged(format!("{} does not pay the queried script", checked.txid)));
            }
            out.push(checked);
        }
        Ok(out)
    }
}

/// Faults an explorer can exhibit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorerFaults {
    /// Report every output as unspent.
    #[serde(default)]
    pub hide_spends: bool,
    #[serde(default)]
    pub offline: bool,
}

/// Third-party query service over a ledger; its answers are trusted as given.
pub struct Explorer<'a> {
    ledger: &'a Ledger,
    faults: ExplorerFaults,
}

impl<'a> Explorer<'a> {
    pub fn new(ledger: &'a Ledger) -> Self {
        Explorer { ledger, faults: ExplorerFaults::default() }
    }

    pub fn with_faults(ledger: &'a Ledger, faults: ExplorerFaults) -> Self {
        Explorer { ledger, faults }
    }

    fn online(&self) -> Result<(), SourceError> {
        if self.faults.offline {
            return Err(SourceError::Unavailable("explorer offline".into()));
        }
        Ok(())
    }
}

impl ChainSource for Explorer<'_> {
    fn mode(&self) -> SourceMode {
        SourceMode::Explorer
    }

    fn transaction(&self, txid: &Txid) -> Result<Option<SourcedTx>, SourceError> {
        self.online()?;
        Ok(sourced(self.ledger, txid))
    }

    fn spender(&self, outpoint: &OutPoint) -> Result<Option<SourcedTx>, SourceError> {
        self.online()?;
        if self.faults.hide_spends {
            return Ok(None);
        }
        Ok(spender_of(self.ledger, outpoint))
    }

    fn paying(&self, script: &Script) -> Result<Vec<SourcedTx>, SourceError> {
        self.online()?;
        FullLedger(self.ledger).paying(script)
    }
}
