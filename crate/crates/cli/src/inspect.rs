//! Queries against an exported ledger.

use std::fmt::Write as _;

use chainid_core::economics::Template;
use chainid_core::group::{PrimeGroup, Secp256k1};
use chainid_core::ledger::{Address, BlockHash, Ledger, OutPoint, Script, Transaction, TxOutput, Txid};
use chainid_core::protocol::payload::{REQUEST_DOUBLE_TAG, REQUEST_TAG};
use chainid_core::protocol::{
    identity_status, parse_publish, reputation_report, FullLedger, IdentityStatus, ProofRef, ReportRow, SpendKind,
    TokenState,
};
use serde::Serialize;

use crate::engine::describe_tx;

#[derive(Clone, Debug)]
pub enum Query {
    Tx(Txid),
    Identity(Txid),
    Report(Address),
    Utxo { branch: Option<usize> },
}

#[derive(Debug, thiserror::Error)]
pub enum InspectError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no branch {0}")]
    UnknownBranch(usize),
    #[error("{0}")]
    Source(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct PublishView {
    pub issuer: Address,
    pub user: Address,
    /// Encoded commitment `h`.
    pub commitment: String,
    pub uses: u16,
    pub value: u64,
    pub token_script: Script,
}

#[derive(Clone, Debug, Serialize)]
pub struct TxView {
    pub txid: Txid,
    pub label: &'static str,
    pub template: Option<Template>,
    pub classification: Option<SpendKind>,
    /// `None` while queued or when only a side branch holds it.
    pub height: Option<u32>,
    pub block: Option<BlockHash>,
    pub transaction: Transaction,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub publish: Option<PublishView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proof: Option<ProofRef>,
}

#[derive(Clone, Debug, Serialize)]
pub struct UtxoEntry {
    pub outpoint: OutPoint,
    #[serde(flatten)]
    pub output: TxOutput,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "query", rename_all = "snake_case")]
pub enum Report {
    Tx(TxView),
    Identity(IdentityStatus),
    Report { user: Address, rows: Vec<ReportRow> },
    Utxo { branch: usize, height: u32, total: u64, outputs: Vec<UtxoEntry> },
}

pub fn inspect(ledger: &Ledger, query: &Query) -> Result<Report, InspectError> {
    match query {
        Query::Tx(txid) => {
            let tx = ledger.any_transaction(txid).ok_or_else(|| InspectError::NotFound(txid.to_hex()))?;
            let (label, template, classification) = describe_tx(ledger, tx);
            let located = ledger.transaction(txid);
            let publish = parse_publish(tx).map(|p| PublishView {
                issuer: p.issuer,
                user: p.user,
                commitment: hex::encode(Secp256k1::encode(&p.commitment)),
                uses: p.uses,
                value: p.value,
                token_script: p.token_script,
            });
            let proof = tx.data_carrier().and_then(|(_, payload)| match payload.first() {
                Some(&tag @ (REQUEST_TAG | REQUEST_DOUBLE_TAG)) => ProofRef::decode(payload, tag),
                _ => None,
            });
            Ok(Report::Tx(TxView {
                txid: *txid,
                label,
                template,
                classification,
                height: located.as_ref().map(|l| l.height),
                block: located.as_ref().map(|l| l.block_hash),
                transaction: tx.clone(),
                publish,
                proof,
            }))
        }
        Query::Identity(publish) => identity_status(&FullLedger(ledger), *publish)
            .map_err(|e| InspectError::Source(e.to_string()))?
            .map(Report::Identity)
            .ok_or_else(|| InspectError::NotFound(format!("identity {publish}"))),
        Query::Report(user) => {
            let rows = reputation_report(*user, &FullLedger(ledger)).map_err(|e| InspectError::Source(e.to_string()))?;
            let known = !rows.is_empty() || ledger.blocks_on(ledger.active_branch()).is_ok_and(|blocks| {
                blocks.iter().flat_map(|b| &b.transactions).flat_map(|t| &t.outputs).any(|o| o.script.address() == Some(*user))
            });
            if !known {
                return Err(InspectError::NotFound(format!("address {user}")));
            }
            Ok(Report::Report { user: *user, rows })
        }
        Query::Utxo { branch } => {
            let branch = branch.unwrap_or(ledger.active_branch());
            let set = ledger.utxo(branch).map_err(|_| InspectError::UnknownBranch(branch))?;
            let outputs: Vec<UtxoEntry> =
                set.iter().map(|(op, o)| UtxoEntry { outpoint: *op, output: o.clone() }).collect();
            Ok(Report::Utxo {
                branch,
                height: ledger.height_of(branch).map_err(|_| InspectError::UnknownBranch(branch))?,
                total: outputs.iter().map(|e| e.output.value).sum(),
                outputs,
            })
        }
    }
}

fn script_text(script: &Script) -> String {
    match script {
        Script::PayToAddress { address } => format!("pay {address}"),
        Script::Multisig1of2 { keys } => format!("1-of-2 [{} {}]", keys[0], keys[1]),
        Script::DataCarrier { payload } => format!("data {}", hex::encode(payload)),
    }
}

pub fn render(report: &Report) -> String {
    let mut out = String::new();
    match report {
        Report::Tx(v) => {
            let _ = writeln!(out, "tx {} ({})", v.txid, v.label);
            match (v.height, v.block) {
                (Some(h), Some(b)) => {
                    let _ = writeln!(out, "  confirmed at height {h} in {b}");
                }
                _ => {
                    let _ = writeln!(out, "  not on the active chain");
                }
            }
            for (i, input) in v.transaction.inputs.iter().enumerate() {
                let _ = writeln!(out, "  in  {i}: {} signer {}", input.outpoint, input.signer);
            }
            for (i, o) in v.transaction.outputs.iter().enumerate() {
                let _ = writeln!(out, "  out {i}: {:>10} sat  {}", o.value, script_text(&o.script));
            }
            if let Some(p) = &v.publish {
                let _ = writeln!(out, "  issuer {}  user {}", p.issuer, p.user);
                let _ = writeln!(out, "  h = {}", p.commitment);
                let _ = writeln!(out, "  use limit {}, token {} sat", p.uses, p.value);
            }
            if let Some(p) = &v.proof {
                let _ = writeln!(out, "  proof {} at {:?}", p.hash, p.locator);
            }
        }
        Report::Identity(s) => {
            let _ = writeln!(out, "identity {} issued by {} to {}", s.publish, s.issuer, s.user);
            let _ = writeln!(out, "  {}/{} uses, token {} holding {} sat", s.uses, s.limit, s.token, s.value);
            for (txid, kind) in &s.hops {
                let _ = writeln!(out, "  {kind:?} {txid}");
            }
            let state = match &s.state {
                TokenState::Active => "Active".to_string(),
                TokenState::Exhausted => "Exhausted".to_string(),
                TokenState::Revoked { txid, signer } => format!("Revoked by {txid} (signer {signer})"),
            };
            let _ = writeln!(out, "  status {state}");
        }
        Report::Report { user, rows } => {
            let _ = writeln!(out, "{} authentication(s) by {user}", rows.len());
            for r in rows {
                let accepted = r.accept.map_or("not accepted".to_string(), |a| format!("accepted in {a}"));
                let _ = writeln!(out, "  {} at {} (issuer {}), {accepted}", r.request, r.sp, r.issuer);
            }
        }
        Report::Utxo { branch, height, total, outputs } => {
            let _ = writeln!(out, "branch {branch} at height {height}: {} outputs, {total} sat", outputs.len());
            for e in outputs {
                let _ = writeln!(out, "  {} {:>10} sat  {}", e.outpoint, e.output.value, script_text(&e.output.script));
            }
        }
    }
    out
}
