use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::economics::FeeSchedule;
use crate::group::Secp256k1;
use crate::hash::Hash32;
use crate::schnorr::verify_encoded;

use super::merkle::{merkle_root, MerkleProof};
use super::types::{
    Address, Block, BlockHash, BlockHeader, OutPoint, Script, Transaction, TxOutput, Txid, MAX_DATA_CARRIER_BYTES,
};
use super::{BranchId, LedgerError, TxError};

pub type UtxoSet = BTreeMap<OutPoint, TxOutput>;

const BLOCK_VERSION: u32 = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub address: Address,
    pub value: u64,
}

/// Initial coin distribution, paid by a single input-less genesis transaction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genesis {
    pub allocations: Vec<Allocation>,
}

impl Genesis {
    pub fn new(allocations: impl IntoIterator<Item = (Address, u64)>) -> Self {
        Genesis { allocations: allocations.into_iter().map(|(address, value)| Allocation { address, value }).collect() }
    }

    pub fn transaction(&self) -> Transaction {
        Transaction::new(
            Vec::new(),
            self.allocations.iter().map(|a| TxOutput::new(a.value, Script::pay_to(a.address))).collect(),
        )
    }
}

/// State of an outpoint as seen from one branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutputStatus {
    Unspent(TxOutput),
    Spent,
    Unspendable,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Spender {
    pub txid: Txid,
    pub input: usize,
    pub height: u32,
}

#[derive(Clone, Debug)]
pub struct TxLocation<'a> {
    pub tx: &'a Transaction,
    pub height: u32,
    pub block_hash: BlockHash,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MempoolEntry {
    pub txid: Txid,
    pub branch: BranchId,
    pub tx: Transaction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Eviction {
    pub txid: Txid,
    pub reason: TxError,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MinedBlock {
    pub branch: BranchId,
    pub height: u32,
    pub hash: BlockHash,
    pub included: Vec<Txid>,
    pub evicted: Vec<Eviction>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LedgerEvent {
    Submitted { txid: Txid, branch: BranchId },
    Mined(MinedBlock),
    Forked { branch: BranchId, at_height: u32 },
    Reorged { from: BranchId, to: BranchId, height: u32 },
}

#[derive(Clone, Debug)]
pub(super) struct StoredBlock {
    pub(super) block: Block,
    pub(super) hash: BlockHash,
    pub(super) txids: Vec<Txid>,
    pub(super) parent: Option<usize>,
    /// Arrival order, used to break ties between equally long branches.
    pub(super) seen: u64,
}

#[derive(Clone, Debug)]
pub(super) struct BranchState {
    pub(super) tip: usize,
    pub(super) utxo: UtxoSet,
}

#[derive(Clone, Debug)]
pub struct Ledger {
    pub(super) schedule: FeeSchedule,
    pub(super) blocks: Vec<StoredBlock>,
    tx_index: HashMap<Txid, Vec<(usize, usize)>>,
    pub(super) branches: Vec<BranchState>,
    pub(super) active: BranchId,
    pub(super) mempool: Vec<MempoolEntry>,
    seq: u64,
    journal: Vec<LedgerEvent>,
}

fn apply(utxo: &mut UtxoSet, txid: Txid, tx: &Transaction) {
    for input in &tx.inputs {
        utxo.remove(&input.outpoint);
    }
    for (i, output) in tx.outputs.iter().enumerate() {
        if !output.script.is_data_carrier() {
            utxo.insert(OutPoint::new(txid, i as u32), output.clone());
        }
    }
}

fn status_in(tx: &Transaction, vout: u32, spent: bool) -> OutputStatus {
    match tx.outputs.get(vout as usize) {
        None => OutputStatus::Unknown,
        Some(o) if o.script.is_data_carrier() => OutputStatus::Unspendable,
        Some(o) if !spent => OutputStatus::Unspent(o.clone()),
        Some(_) => OutputStatus::Spent,
    }
}

/// Stateless checks plus input resolution through `lookup`. Returns the fee.
pub(super) fn validate(
    tx: &Transaction,
    dust: u64,
    lookup: impl Fn(&OutPoint) -> OutputStatus,
) -> Result<u64, TxError> {
    if tx.inputs.is_empty() {
        return Err(TxError::NoInputs);
    }
    if tx.outputs.is_empty() {
        return Err(TxError::NoOutputs);
    }
    let mut carriers = 0;
    for (index, output) in tx.outputs.iter().enumerate() {
        match &output.script {
            Script::DataCarrier { payload } => {
                carriers += 1;
                if carriers > 1 {
                    return Err(TxError::MultipleDataCarriers);
                }
                if payload.len() > MAX_DATA_CARRIER_BYTES {
                    return Err(TxError::OversizedDataCarrier { len: payload.len(), max: MAX_DATA_CARRIER_BYTES });
                }
                if output.value != 0 {
                    return Err(TxError::NonzeroDataCarrierValue { index, value: output.value });
                }
            }
            _ if output.value < dust => return Err(TxError::DustOutput { index, value: output.value, dust }),
            _ => {}
        }
    }
    let outputs = tx.output_total().ok_or(TxError::ValueOverflow)?;

    let mut seen = HashSet::new();
    let mut inputs = 0u64;
    for (i, input) in tx.inputs.iter().enumerate() {
        let outpoint = input.outpoint;
        if !seen.insert(outpoint) {
            return Err(TxError::DoubleSpend { outpoint });
        }
        let spent = match lookup(&outpoint) {
            OutputStatus::Unspent(o) => o,
            OutputStatus::Spent => return Err(TxError::DoubleSpend { outpoint }),
            OutputStatus::Unspendable => return Err(TxError::UnspendableOutput { outpoint }),
            OutputStatus::Unknown => return Err(TxError::UnknownOutpoint { outpoint }),
        };
        let authorized = spent
            .script
            .signer_address(input.signer)
            .is_some_and(|addr| Address::from_public_key(&input.public_key) == addr)
            && verify_encoded::<Secp256k1>(&input.public_key, &input.signature, &tx.sighash(i));
        if !authorized {
            return Err(TxError::BadSignature { input: i });
        }
        inputs = inputs.checked_add(spent.value).ok_or(TxError::ValueOverflow)?;
    }
    if outputs > inputs {
        return Err(TxError::NegativeFee { inputs, outputs });
    }
    Ok(inputs - outputs)
}

impl Ledger {
    pub fn new(schedule: FeeSchedule, genesis: &Genesis) -> Self {
        let tx = genesis.transaction();
        let txid = tx.txid();
        let header = BlockHeader {
            version: BLOCK_VERSION,
            prev: Hash32::ZERO,
            merkle_root: merkle_root(&[txid]),
            height: 0,
            time: 0,
            nonce: 0,
        };
        let mut utxo = UtxoSet::new();
        apply(&mut utxo, txid, &tx);
        let hash = header.hash();
        let mut ledger = Ledger {
            schedule,
            blocks: vec![StoredBlock {
                block: Block { header, transactions: vec![tx] },
                hash,
                txids: vec![txid],
                parent: None,
                seen: 0,
            }],
            tx_index: HashMap::new(),
            branches: vec![BranchState { tip: 0, utxo }],
            active: 0,
            mempool: Vec::new(),
            seq: 0,
            journal: Vec::new(),
        };
        ledger.tx_index.insert(txid, vec![(0, 0)]);
        ledger
    }

    pub fn schedule(&self) -> &FeeSchedule {
        &self.schedule
    }

    pub fn active_branch(&self) -> BranchId {
        self.active
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    fn branch(&self, branch: BranchId) -> Result<&BranchState, LedgerError> {
        self.branches.get(branch).ok_or(LedgerError::UnknownBranch(branch))
    }

    /// Height of the active tip.
    pub fn height(&self) -> u32 {
        self.blocks[self.branches[self.active].tip].block.header.height
    }

    pub fn height_of(&self, branch: BranchId) -> Result<u32, LedgerError> {
        Ok(self.blocks[self.branch(branch)?.tip].block.header.height)
    }

    pub fn tip_hash(&self, branch: BranchId) -> Result<BlockHash, LedgerError> {
        Ok(self.blocks[self.branch(branch)?.tip].hash)
    }

    /// Block indices from genesis to the tip of `branch`.
    fn chain(&self, branch: BranchId) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = Some(self.branches[branch].tip);
        while let Some(i) = cur {
            out.push(i);
            cur = self.blocks[i].parent;
        }
        out.reverse();
        out
    }

    fn is_ancestor(&self, block: usize, tip: usize) -> bool {
        let target = self.blocks[block].block.header.height;
        let mut cur = tip;
        loop {
            let b = &self.blocks[cur];
            if b.block.header.height == target {
                return cur == block;
            }
            match b.parent {
                Some(p) if b.block.header.height > target => cur = p,
                _ => return false,
            }
        }
    }

    fn locate_on(&self, tip: usize, txid: &Txid) -> Option<(usize, usize)> {
        self.tx_index.get(txid)?.iter().copied().find(|&(b, _)| self.is_ancestor(b, tip))
    }

    fn confirmed_status(&self, tip: usize, utxo: &UtxoSet, outpoint: &OutPoint) -> OutputStatus {
        if let Some(o) = utxo.get(outpoint) {
            return OutputStatus::Unspent(o.clone());
        }
        match self.locate_on(tip, &outpoint.txid) {
            Some((b, p)) => status_in(&self.blocks[b].block.transactions[p], outpoint.vout, true),
            None => OutputStatus::Unknown,
        }
    }

    /// Confirmed status of `outpoint` on the active chain.
    pub fn output_status(&self, outpoint: &OutPoint) -> OutputStatus {
        let b = &self.branches[self.active];
        self.confirmed_status(b.tip, &b.utxo, outpoint)
    }

    fn pending_status(&self, branch: BranchId, outpoint: &OutPoint) -> OutputStatus {
        let b = &self.branches[branch];
        match self.confirmed_status(b.tip, &b.utxo, outpoint) {
            OutputStatus::Unknown => self
                .mempool
                .iter()
                .find(|e| e.branch == branch && e.txid == outpoint.txid)
                .map_or(OutputStatus::Unknown, |e| status_in(&e.tx, outpoint.vout, false)),
            status => status,
        }
    }

    /// Validates `tx` against the active branch and queues it for mining.
    pub fn submit(&mut self, tx: Transaction) -> Result<Txid, TxError> {
        self.submit_to(self.active, tx)
    }

    /// Validates `tx` against `branch` (confirmed outputs plus outputs of
    /// queued transactions) and queues it for that branch. Conflicting
    /// queued spends are allowed; mining keeps the first.
    pub fn submit_to(&mut self, branch: BranchId, tx: Transaction) -> Result<Txid, TxError> {
        assert!(branch < self.branches.len(), "unknown branch {branch}");
        let txid = tx.txid();
        let tip = self.branches[branch].tip;
        if self.locate_on(tip, &txid).is_some() || self.mempool.iter().any(|e| e.branch == branch && e.txid == txid) {
            return Err(TxError::DuplicateTransaction { txid });
        }
        validate(&tx, self.schedule.dust, |op| self.pending_status(branch, op))?;
        self.mempool.push(MempoolEntry { txid, branch, tx });
        self.journal.push(LedgerEvent::Submitted { txid, branch });
        Ok(txid)
    }

    pub fn mempool(&self) -> &[MempoolEntry] {
        &self.mempool
    }

    pub fn mempool_transaction(&self, txid: &Txid) -> Option<&Transaction> {
        self.mempool.iter().find(|e| &e.txid == txid).map(|e| &e.tx)
    }

    /// Mines one block on the active branch.
    pub fn mine(&mut self) -> MinedBlock {
        self.mine_on(self.active).expect("active branch exists")
    }

    /// Mines the queued transactions for `branch` in arrival order. Any that
    /// no longer validate are evicted and reported.
    pub fn mine_on(&mut self, branch: BranchId) -> Result<MinedBlock, LedgerError> {
        let state = self.branch(branch)?;
        let tip = state.tip;
        let mut utxo = state.utxo.clone();
        let (queued, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.mempool).into_iter().partition(|e| e.branch == branch);
        self.mempool = rest;

        let mut included: Vec<MempoolEntry> = Vec::new();
        let mut evicted = Vec::new();
        for entry in queued {
            let result = validate(&entry.tx, self.schedule.dust, |op| match self.confirmed_status(tip, &utxo, op) {
                OutputStatus::Unknown => included
                    .iter()
                    .find(|e| e.txid == op.txid)
                    .map_or(OutputStatus::Unknown, |e| status_in(&e.tx, op.vout, true)),
                status => status,
            });
            match result {
                Ok(_) => {
                    apply(&mut utxo, entry.txid, &entry.tx);
                    included.push(entry);
                }
                Err(reason) => evicted.push(Eviction { txid: entry.txid, reason }),
            }
        }

        let txids: Vec<Txid> = included.iter().map(|e| e.txid).collect();
        let height = self.blocks[tip].block.header.height + 1;
        let header = BlockHeader {
            version: BLOCK_VERSION,
            prev: self.blocks[tip].hash,
            merkle_root: merkle_root(&txids),
            height,
            time: height,
            nonce: 0,
        };
        let block = Block { header, transactions: included.into_iter().map(|e| e.tx).collect() };
        let index = self.push_block(block, tip);
        self.branches[branch] = BranchState { tip: index, utxo };
        let mined = MinedBlock { branch, height, hash: self.blocks[index].hash, included: txids, evicted };
        self.journal.push(LedgerEvent::Mined(mined.clone()));
        Ok(mined)
    }

    pub(super) fn push_block(&mut self, block: Block, parent: usize) -> usize {
        let index = self.blocks.len();
        let txids = block.txids();
        for (pos, txid) in txids.iter().enumerate() {
            self.tx_index.entry(*txid).or_default().push((index, pos));
        }
        self.seq += 1;
        self.blocks.push(StoredBlock { hash: block.hash(), block, txids, parent: Some(parent), seen: self.seq });
        index
    }

    /// Starts a new branch whose tip is the active chain's block at `at_height`.
    pub fn fork(&mut self, at_height: u32) -> Result<BranchId, LedgerError> {
        let chain = self.chain(self.active);
        let tip = *chain.get(at_height as usize).ok_or(LedgerError::UnknownHeight(at_height))?;
        let utxo = self.replay(tip);
        self.branches.push(BranchState { tip, utxo });
        let branch = self.branches.len() - 1;
        self.journal.push(LedgerEvent::Forked { branch, at_height });
        Ok(branch)
    }

    /// Switches to the longest branch, preferring the one whose tip arrived
    /// first. Returns `(from, to)` when the active branch changed.
    pub fn reorg(&mut self) -> Option<(BranchId, BranchId)> {
        let key = |b: &BranchState| {
            let tip = &self.blocks[b.tip];
            (std::cmp::Reverse(tip.block.header.height), tip.seen)
        };
        let best = (0..self.branches.len()).min_by_key(|&i| key(&self.branches[i]))?;
        if best == self.active || key(&self.branches[best]) == key(&self.branches[self.active]) {
            return None;
        }
        let from = self.active;
        self.active = best;
        let rebuilt = self.replay(self.branches[best].tip);
        debug_assert_eq!(rebuilt, self.branches[best].utxo);
        self.branches[best].utxo = rebuilt;
        self.journal.push(LedgerEvent::Reorged { from, to: best, height: self.height() });
        Some((from, best))
    }

    /// UTXO set obtained by replaying every block from genesis to `tip`.
    pub(super) fn replay(&self, tip: usize) -> UtxoSet {
        let mut chain = Vec::new();
        let mut cur = Some(tip);
        while let Some(i) = cur {
            chain.push(i);
            cur = self.blocks[i].parent;
        }
        let mut utxo = UtxoSet::new();
        for &i in chain.iter().rev() {
            let b = &self.blocks[i];
            for (tx, txid) in b.block.transactions.iter().zip(&b.txids) {
                apply(&mut utxo, *txid, tx);
            }
        }
        utxo
    }

    pub fn utxo(&self, branch: BranchId) -> Result<&UtxoSet, LedgerError> {
        Ok(&self.branch(branch)?.utxo)
    }

    pub fn replay_utxo(&self, branch: BranchId) -> Result<UtxoSet, LedgerError> {
        Ok(self.replay(self.branch(branch)?.tip))
    }

    /// Value in existence on the active chain: genesis allocations minus fees.
    pub fn total_value(&self) -> u64 {
        self.branches[self.active].utxo.values().map(|o| o.value).sum()
    }

    pub fn blocks_on(&self, branch: BranchId) -> Result<Vec<&Block>, LedgerError> {
        self.branch(branch)?;
        Ok(self.chain(branch).into_iter().map(|i| &self.blocks[i].block).collect())
    }

    /// Headers of the active chain, genesis first.
    pub fn headers(&self) -> Vec<BlockHeader> {
        self.chain(self.active).into_iter().map(|i| self.blocks[i].block.header.clone()).collect()
    }

    pub fn header_at(&self, height: u32) -> Result<BlockHeader, LedgerError> {
        let chain = self.chain(self.active);
        let i = chain.get(height as usize).ok_or(LedgerError::UnknownHeight(height))?;
        Ok(self.blocks[*i].block.header.clone())
    }

    /// Confirmed transaction on the active chain.
    pub fn transaction(&self, txid: &Txid) -> Option<TxLocation<'_>> {
        let (b, position) = self.locate_on(self.branches[self.active].tip, txid)?;
        let stored = &self.blocks[b];
        Some(TxLocation {
            tx: &stored.block.transactions[position],
            height: stored.block.header.height,
            block_hash: stored.hash,
            position,
        })
    }

    /// Any transaction the ledger has seen, on any branch or still queued.
    pub fn any_transaction(&self, txid: &Txid) -> Option<&Transaction> {
        if let Some(&(b, p)) = self.tx_index.get(txid).and_then(|v| v.first()) {
            return Some(&self.blocks[b].block.transactions[p]);
        }
        self.mempool_transaction(txid)
    }

    /// Header and Merkle path proving `txid` is in the active chain.
    pub fn inclusion_proof(&self, txid: &Txid) -> Option<(BlockHeader, MerkleProof)> {
        let (b, position) = self.locate_on(self.branches[self.active].tip, txid)?;
        let stored = &self.blocks[b];
        Some((stored.block.header.clone(), MerkleProof::build(&stored.txids, position)?))
    }

    /// Confirmed transaction on the active chain spending `outpoint`, if any.
    pub fn find_spender(&self, outpoint: &OutPoint) -> Result<Option<Spender>, LedgerError> {
        self.find_spender_on(self.active, outpoint)
    }

    pub fn find_spender_on(&self, branch: BranchId, outpoint: &OutPoint) -> Result<Option<Spender>, LedgerError> {
        let state = self.branch(branch)?;
        let (b, p) = self.locate_on(state.tip, &outpoint.txid).ok_or(LedgerError::UnknownOutpoint(*outpoint))?;
        if self.blocks[b].block.transactions[p].outputs.len() <= outpoint.vout as usize {
            return Err(LedgerError::UnknownOutpoint(*outpoint));
        }
        if state.utxo.contains_key(outpoint) {
            return Ok(None);
        }
        for i in self.chain(branch).into_iter().skip_while(|&i| i != b) {
            let stored = &self.blocks[i];
            for (tx, txid) in stored.block.transactions.iter().zip(&stored.txids) {
                if let Some(input) = tx.inputs.iter().position(|inp| inp.outpoint == *outpoint) {
                    return Ok(Some(Spender { txid: *txid, input, height: stored.block.header.height }));
                }
            }
        }
        Ok(None)
    }

    /// Confirmed transactions on the active chain with an output to `script`.
    pub fn transactions_paying(&self, script: &Script) -> Vec<(Txid, u32)> {
        let mut out = Vec::new();
        for i in self.chain(self.active) {
            let stored = &self.blocks[i];
            for (tx, txid) in stored.block.transactions.iter().zip(&stored.txids) {
                if tx.outputs.iter().any(|o| &o.script == script) {
                    out.push((*txid, stored.block.header.height));
                }
            }
        }
        out
    }

    /// Outputs locked by `script` on `branch` that neither a block nor a
    /// queued transaction has spent, including outputs of queued ones.
    pub fn spendable_on(&self, branch: BranchId, script: &Script) -> Vec<(OutPoint, TxOutput)> {
        let Some(state) = self.branches.get(branch) else { return Vec::new() };
        let queued: Vec<&MempoolEntry> = self.mempool.iter().filter(|e| e.branch == branch).collect();
        let spent: HashSet<OutPoint> = queued.iter().flat_map(|e| e.tx.inputs.iter().map(|i| i.outpoint)).collect();
        let mut out: Vec<(OutPoint, TxOutput)> =
            state.utxo.iter().filter(|(_, o)| &o.script == script).map(|(p, o)| (*p, o.clone())).collect();
        for e in queued {
            for (i, o) in e.tx.outputs.iter().enumerate() {
                if &o.script == script {
                    out.push((OutPoint::new(e.txid, i as u32), o.clone()));
                }
            }
        }
        out.retain(|(p, _)| !spent.contains(p));
        out
    }

    pub fn spendable(&self, script: &Script) -> Vec<(OutPoint, TxOutput)> {
        self.spendable_on(self.active, script)
    }

    pub fn balance(&self, address: Address) -> u64 {
        self.spendable(&Script::pay_to(address)).iter().map(|(_, o)| o.value).sum()
    }

    /// Removes and returns events recorded since the last drain.
    pub fn drain_events(&mut self) -> Vec<LedgerEvent> {
        std::mem::take(&mut self.journal)
    }

    pub(super) fn from_parts(schedule: FeeSchedule, genesis: Block) -> Self {
        let mut ledger = Ledger::new(schedule, &Genesis::default());
        let txids = genesis.txids();
        let mut utxo = UtxoSet::new();
        for (tx, txid) in genesis.transactions.iter().zip(&txids) {
            apply(&mut utxo, *txid, tx);
        }
        ledger.tx_index.clear();
        for (pos, txid) in txids.iter().enumerate() {
            ledger.tx_index.entry(*txid).or_default().push((0, pos));
        }
        ledger.blocks[0] = StoredBlock { hash: genesis.hash(), block: genesis, txids, parent: None, seen: 0 };
        ledger.branches[0].utxo = utxo;
        ledger
    }

    /// Appends an already-built block after validating every transaction
    /// against the parent's state.
    pub(super) fn import_block(&mut self, block: Block, parent: usize) -> Result<usize, String> {
        let expected_height = self.blocks[parent].block.header.height + 1;
        if block.header.prev != self.blocks[parent].hash || block.header.height != expected_height {
            return Err(format!("block at height {} does not extend its parent", block.header.height));
        }
        if block.header.merkle_root != merkle_root(&block.txids()) {
            return Err(format!("merkle root mismatch at height {}", block.header.height));
        }
        let mut utxo = self.replay(parent);
        let mut done: Vec<(Txid, &Transaction)> = Vec::new();
        for tx in &block.transactions {
            let txid = tx.txid();
            if self.locate_on(parent, &txid).is_some() || done.iter().any(|(t, _)| *t == txid) {
                return Err(format!("duplicate transaction {txid}"));
            }
            validate(tx, self.schedule.dust, |op| match self.confirmed_status(parent, &utxo, op) {
                OutputStatus::Unknown => {
                    done.iter().find(|(t, _)| *t == op.txid).map_or(OutputStatus::Unknown, |(_, tx)| status_in(tx, op.vout, true))
                }
                s => s,
            })
            .map_err(|e| format!("transaction {txid}: {e}"))?;
            apply(&mut utxo, txid, tx);
            done.push((txid, tx));
        }
        Ok(self.push_block(block, parent))
    }

    pub(super) fn set_branches(&mut self, tips: Vec<usize>, active: BranchId) {
        self.branches = tips.into_iter().map(|tip| BranchState { tip, utxo: self.replay(tip) }).collect();
        self.active = active;
    }

    pub(super) fn block_index(&self, hash: &BlockHash) -> Option<usize> {
        self.blocks.iter().position(|b| &b.hash == hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::TxInput;
    use crate::schnorr::SigningKey;

    type Key = SigningKey<Secp256k1>;

    fn setup() -> (Ledger, Key, Key) {
        let a = Key::from_seed(b"alice");
        let b = Key::from_seed(b"bob");
        let genesis = Genesis::new([(Address::of_key(&a), 100_000), (Address::of_key(&b), 50_000)]);
        (Ledger::new(FeeSchedule::standard(), &genesis), a, b)
    }

    fn pay(ledger: &Ledger, from: &Key, outputs: Vec<TxOutput>) -> Transaction {
        let (op, _) = ledger.spendable(&Script::pay_to(Address::of_key(from)))[0].clone();
        let mut tx = Transaction::new(vec![TxInput::unsigned(op)], outputs);
        tx.sign_input(0, from, 0);
        tx
    }

    #[test]
    fn genesis_funds_allocations() {
        let (ledger, a, b) = setup();
        assert_eq!(ledger.height(), 0);
        assert_eq!(ledger.balance(Address::of_key(&a)), 100_000);
        assert_eq!(ledger.balance(Address::of_key(&b)), 50_000);
        assert_eq!(ledger.total_value(), 150_000);
    }

    #[test]
    fn submit_mine_and_spend_tracking() {
        let (mut ledger, a, b) = setup();
        let tx = pay(&ledger, &a, vec![TxOutput::new(60_000, Script::pay_to(Address::of_key(&b)))]);
        let spent = tx.inputs[0].outpoint;
        let txid = ledger.submit(tx).unwrap();
        let block = ledger.mine();
        assert_eq!(block.included, vec![txid]);
        assert_eq!(ledger.total_value(), 110_000);
        assert_eq!(ledger.find_spender(&spent).unwrap().unwrap().txid, txid);
        assert_eq!(ledger.find_spender(&OutPoint::new(txid, 0)).unwrap(), None);
        assert!(ledger.find_spender(&OutPoint::new(txid, 5)).is_err());
        let (header, proof) = ledger.inclusion_proof(&txid).unwrap();
        assert!(crate::ledger::verify_inclusion(&header, &txid, &proof));
    }

    #[test]
    fn rejections() {
        let (mut ledger, a, b) = setup();
        let to_b = Script::pay_to(Address::of_key(&b));
        let over = pay(&ledger, &a, vec![TxOutput::new(100_001, to_b.clone())]);
        assert!(matches!(ledger.submit(over), Err(TxError::NegativeFee { .. })));
        let dust = pay(&ledger, &a, vec![TxOutput::new(545, to_b.clone())]);
        assert!(matches!(ledger.submit(dust), Err(TxError::DustOutput { .. })));
        let big = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone()), TxOutput::new(0, Script::data(vec![0; 81]))]);
        assert!(matches!(ledger.submit(big), Err(TxError::OversizedDataCarrier { .. })));
        let valued = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone()), TxOutput::new(1, Script::data(vec![0; 3]))]);
        assert!(matches!(ledger.submit(valued), Err(TxError::NonzeroDataCarrierValue { .. })));
        let two = pay(
            &ledger,
            &a,
            vec![TxOutput::new(0, Script::data(vec![1])), TxOutput::new(0, Script::data(vec![2]))],
        );
        assert!(matches!(ledger.submit(two), Err(TxError::MultipleDataCarriers)));

        let mut forged = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone())]);
        forged.sign_input(0, &b, 0);
        assert!(matches!(ledger.submit(forged), Err(TxError::BadSignature { input: 0 })));

        let mut tampered = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone())]);
        tampered.outputs[0].value = 2000;
        assert!(matches!(ledger.submit(tampered), Err(TxError::BadSignature { input: 0 })));

        let mut ghost = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone())]);
        ghost.inputs[0].outpoint.vout = 9;
        ghost.sign_input(0, &a, 0);
        assert!(matches!(ledger.submit(ghost), Err(TxError::UnknownOutpoint { .. })));

        let mut twice = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone())]);
        twice.inputs.push(twice.inputs[0].clone());
        twice.sign_input(0, &a, 0);
        twice.sign_input(1, &a, 0);
        assert!(matches!(ledger.submit(twice), Err(TxError::DoubleSpend { .. })));

        let ok = pay(&ledger, &a, vec![TxOutput::new(1000, to_b.clone())]);
        ledger.submit(ok.clone()).unwrap();
        assert!(matches!(ledger.submit(ok), Err(TxError::DuplicateTransaction { .. })));
    }

    #[test]
    fn conflicting_queue_entries_keep_the_first() {
        let (mut ledger, a, b) = setup();
        let first = pay(&ledger, &a, vec![TxOutput::new(90_000, Script::pay_to(Address::of_key(&b)))]);
        let second = pay(&ledger, &a, vec![TxOutput::new(80_000, Script::pay_to(Address::of_key(&a)))]);
        let t1 = ledger.submit(first).unwrap();
        let t2 = ledger.submit(second.clone()).unwrap();
        let block = ledger.mine();
        assert_eq!(block.included, vec![t1]);
        assert_eq!(block.evicted.len(), 1);
        assert_eq!(block.evicted[0].txid, t2);
        assert_eq!(block.evicted[0].reason.kind(), "double_spend");
        assert!(matches!(ledger.submit(second), Err(TxError::DoubleSpend { .. })));
    }

    #[test]
    fn chained_unconfirmed_spends_mine_together() {
        let (mut ledger, a, b) = setup();
        let first = pay(&ledger, &a, vec![TxOutput::new(90_000, Script::pay_to(Address::of_key(&a)))]);
        ledger.submit(first).unwrap();
        let second = pay(&ledger, &a, vec![TxOutput::new(80_000, Script::pay_to(Address::of_key(&b)))]);
        ledger.submit(second).unwrap();
        let block = ledger.mine();
        assert_eq!(block.included.len(), 2);
        assert!(block.evicted.is_empty());
        assert_eq!(ledger.balance(Address::of_key(&b)), 130_000);
    }

    #[test]
    fn longer_fork_wins_and_ties_keep_first_seen() {
        let (mut ledger, a, b) = setup();
        ledger.mine();
        let to_b = pay(&ledger, &a, vec![TxOutput::new(90_000, Script::pay_to(Address::of_key(&b)))]);
        let to_a = pay(&ledger, &a, vec![TxOutput::new(90_000, Script::pay_to(Address::of_key(&a)))]);
        let t_main = ledger.submit(to_b).unwrap();
        ledger.mine();
        let fork = ledger.fork(1).unwrap();
        let t_fork = ledger.submit_to(fork, to_a).unwrap();
        ledger.mine_on(fork).unwrap();
        assert_eq!(ledger.reorg(), None);
        assert!(ledger.transaction(&t_main).is_some());
        ledger.mine_on(fork).unwrap();
        assert_eq!(ledger.reorg(), Some((0, fork)));
        assert!(ledger.transaction(&t_main).is_none());
        assert!(ledger.transaction(&t_fork).is_some());
        assert_eq!(ledger.height(), 3);
        assert_eq!(ledger.utxo(fork).unwrap(), &ledger.replay_utxo(fork).unwrap());
        assert!(ledger.fork(9).is_err());
    }
}
