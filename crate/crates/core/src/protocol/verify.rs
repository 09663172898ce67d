use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dlrep::{self, attribute_scalar, combine, DlrepCommitment, DlrepProof, GeneratorSet};
use crate::group::Secp256k1;
use crate::hash::Hash32;
use crate::ledger::{Address, OutPoint, Script, Txid};

use super::ops::FieldRef;
use super::shape::{classify_spend, parse_publish, proof_ref, token_output, PublishInfo, SpendKind};
use super::source::{ChainSource, SourceError, SourcedTx};
use super::store::{ProofStore, StoreError};

/// Longest chain a verifier will walk before giving up.
pub const MAX_HOPS: usize = u16::MAX as usize + 1;

/// What a service provider insists the proof discloses.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    #[serde(default)]
    pub reveal: Vec<(FieldRef, String)>,
    #[serde(default)]
    pub link: Vec<(FieldRef, FieldRef)>,
}

/// A service provider's policy: trusted issuers with their published
/// generators, and an optional disclosure demand.
#[derive(Clone, Debug, Default)]
pub struct Verifier {
    trusted: BTreeMap<Address, GeneratorSet<Secp256k1>>,
    demand: Option<Demand>,
}

impl Verifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trust(mut self, issuer: Address, generators: GeneratorSet<Secp256k1>) -> Self {
        self.trusted.insert(issuer, generators);
        self
    }

    pub fn demand(mut self, demand: Demand) -> Self {
        self.demand = Some(demand);
        self
    }

    pub fn trusts(&self, issuer: &Address) -> bool {
        self.trusted.contains_key(issuer)
    }
}

/// The hops of one identity's token from its publish transaction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TokenChain {
    pub publish: Txid,
    pub issuer: Address,
    pub user: Address,
    /// Request transactions, oldest first.
    pub hops: Vec<Txid>,
    pub token: OutPoint,
    pub value: u64,
    pub uses: u32,
    pub limit: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("request {txid} is not confirmed")]
    RequestNotFound { txid: Txid },
    #[error("{txid} does not have a request shape")]
    NotARequest { txid: Txid },
    #[error("token ancestry breaks at {at}")]
    BrokenChain { at: Txid },
    #[error("issuer {issuer} is not trusted")]
    UnknownIssuer { issuer: Address },
    #[error("{uses} uses exceed the limit of {limit}")]
    UseLimitExceeded { uses: u32, limit: u32 },
    #[error("token was revoked by {spender} (signer {signer})")]
    Revoked { spender: Txid, signer: u8 },
    #[error("token was already spent by a later request {spender}")]
    Superseded { spender: Txid },
    #[error("no proof stored under {hash}")]
    ProofMissing { hash: Hash32 },
    #[error("stored proof does not match {hash}")]
    HashMismatch { hash: Hash32 },
    #[error("proof is not bound to the spent token")]
    ContextMismatch,
    #[error("proof bytes are malformed")]
    MalformedProof,
    #[error("proof does not verify: {detail}")]
    InvalidProof { detail: String },
    #[error("proof does not disclose what was demanded")]
    StatementMismatch,
    #[error("{0}")]
    Source(SourceError),
}

impl Rejection {
    pub fn name(&self) -> &'static str {
        match self {
            Rejection::RequestNotFound { .. } => "request_not_found",
            Rejection::NotARequest { .. } => "not_a_request",
            Rejection::BrokenChain { .. } => "broken_chain",
            Rejection::UnknownIssuer { .. } => "unknown_issuer",
            Rejection::UseLimitExceeded { .. } => "use_limit_exceeded",
            Rejection::Revoked { .. } => "revoked",
            Rejection::Superseded { .. } => "superseded",
            Rejection::ProofMissing { .. } => "proof_missing",
            Rejection::HashMismatch { .. } => "hash_mismatch",
            Rejection::ContextMismatch => "context_mismatch",
            Rejection::MalformedProof => "malformed_proof",
            Rejection::InvalidProof { .. } => "invalid_proof",
            Rejection::StatementMismatch => "statement_mismatch",
            Rejection::Source(_) => "source_error",
        }
    }
}

impl From<SourceError> for Rejection {
    fn from(e: SourceError) -> Self {
        Rejection::Source(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Verdict {
    Accept { request: Txid, kind: SpendKind, chains: Vec<TokenChain> },
    Reject(Rejection),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept { .. })
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            Verdict::Reject(r) => Some(r),
            Verdict::Accept { .. } => None,
        }
    }
}

/// Scripts of the outputs spent by `tx`, or `None` if any is unavailable.
pub(crate) fn spent_scripts(source: &dyn ChainSource, tx: &SourcedTx) -> Result<Option<Vec<Script>>, SourceError> {
    let mut out = Vec::new();
    for input in &tx.tx.inputs {
        let Some(prev) = source.transaction(&input.outpoint.txid)? else { return Ok(None) };
        match prev.tx.outputs.get(input.outpoint.vout as usize) {
            Some(o) => out.push(o.script.clone()),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

pub(crate) fn classify_sourced(source: &dyn ChainSource, tx: &SourcedTx) -> Result<SpendKind, SourceError> {
    Ok(match spent_scripts(source, tx)? {
        Some(spent) => classify_spend(&tx.tx, &spent),
        None => SpendKind::Revoke,
    })
}

/// Follows token input `input` of `start` back to its publish transaction.
fn walk_back(source: &dyn ChainSource, start: &SourcedTx, input: usize) -> Result<(PublishInfo, Txid, Vec<Txid>), Rejection> {
    let mut hops = vec![start.txid];
    let mut at = start.txid;
    let mut op = start.tx.inputs[input].outpoint;
    loop {
        let prev = source.transaction(&op.txid)?.ok_or(Rejection::BrokenChain { at })?;
        if let Some(info) = parse_publish(&prev.tx) {
            if op.vout != 1 {
                return Err(Rejection::BrokenChain { at });
            }
            hops.reverse();
            return Ok((info, prev.txid, hops));
        }
        let kind = classify_sourced(source, &prev)?;
        let j = (0..prev.tx.inputs.len())
            .find(|&j| token_output(kind, j) == Some(op.vout))
            .ok_or(Rejection::BrokenChain { at })?;
        if hops.len() >= MAX_HOPS {
            return Err(Rejection::BrokenChain { at: prev.txid });
        }
        hops.push(prev.txid);
        at = prev.txid;
        op = prev.tx.inputs[j].outpoint;
    }
}

fn check_demand(
    demand: &Demand,
    sets: &[&GeneratorSet<Secp256k1>],
    statement: &crate::Statement,
) -> Result<(), Rejection> {
    for (field, value) in &demand.reveal {
        let at = field.resolve(sets).map_err(|_| Rejection::StatementMismatch)?;
        if statement.revealed_value(at) != Some(&attribute_scalar::<Secp256k1>(value)) {
            return Err(Rejection::StatementMismatch);
        }
    }
    for (a, b) in &demand.link {
        let a = a.resolve(sets).map_err(|_| Rejection::StatementMismatch)?;
        let b = b.resolve(sets).map_err(|_| Rejection::StatementMismatch)?;
        if !statement.links().iter().any(|l| (l.left, l.right) == (a, b) || (l.left, l.right) == (b, a)) {
            return Err(Rejection::StatementMismatch);
        }
    }
    Ok(())
}

fn run(verifier: &Verifier, request: Txid, source: &dyn ChainSource, store: &ProofStore) -> Result<Verdict, Rejection> {
    let tx = source.transaction(&request)?.ok_or(Rejection::RequestNotFound { txid: request })?;
    let kind = classify_sourced(source, &tx)?;
    if kind == SpendKind::Revoke {
        return Err(Rejection::NotARequest { txid: request });
    }

    // Chain ancestry for every token input first, then policy checks.
    let walks = (0..tx.tx.inputs.len()).map(|i| walk_back(source, &tx, i)).collect::<Result<Vec<_>, _>>()?;
    let mut sets = Vec::new();
    for (info, _, _) in &walks {
        sets.push(verifier.trusted.get(&info.issuer).ok_or(Rejection::UnknownIssuer { issuer: info.issuer })?);
    }
    for (info, _, hops) in &walks {
        let uses = hops.len() as u32;
        if uses > info.uses as u32 {
            return Err(Rejection::UseLimitExceeded { uses, limit: info.uses as u32 });
        }
    }
    let mut chains = Vec::new();
    for (i, (info, publish, hops)) in walks.iter().enumerate() {
        let token = OutPoint::new(request, token_output(kind, i).expect("request shapes carry a token per input"));
        if let Some(spender) = source.spender(&token)? {
            if classify_sourced(source, &spender)? == SpendKind::Revoke {
                let signer = spender.tx.inputs.iter().find(|inp| inp.outpoint == token).map_or(0, |inp| inp.signer);
                return Err(Rejection::Revoked { spender: spender.txid, signer });
            }
            return Err(Rejection::Superseded { spender: spender.txid });
        }
        chains.push(TokenChain {
            publish: *publish,
            issuer: info.issuer,
            user: info.user,
            hops: hops.clone(),
            token,
            value: tx.tx.outputs[token.vout as usize].value,
            uses: hops.len() as u32,
            limit: info.uses as u32,
        });
    }

    let pointer = proof_ref(&tx.tx, kind).ok_or(Rejection::NotARequest { txid: request })?;
    let bytes = store.get(&pointer.hash).map_err(|e| match e {
        StoreError::HashMismatch(hash) => Rejection::HashMismatch { hash },
        _ => Rejection::ProofMissing { hash: pointer.hash },
    })?;
    let proof = DlrepProof::<Secp256k1>::decode(&bytes).map_err(|_| Rejection::MalformedProof)?;
    let context: Vec<u8> = tx.tx.inputs.iter().flat_map(|i| i.outpoint.encode()).collect();
    if proof.statement().context() != context.as_slice() {
        return Err(Rejection::ContextMismatch);
    }
    let commitments: Vec<DlrepCommitment<Secp256k1>> =
        walks.iter().zip(&sets).map(|((info, _, _), g)| DlrepCommitment::from_parts(info.commitment, (*g).clone())).collect();
    let invalid = |e: dlrep::DlrepError| Rejection::InvalidProof { detail: e.to_string() };
    let joint = match commitments.as_slice() {
        [one] => one.clone(),
        [a, b] => combine(a, b).map_err(invalid)?,
        _ => unreachable!("request shapes have one or two token inputs"),
    };
    dlrep::verify(&[joint], proof.statement(), &proof).map_err(invalid)?;
    if let Some(demand) = &verifier.demand {
        check_demand(demand, &sets, proof.statement())?;
    }
    Ok(Verdict::Accept { request, kind, chains })
}

/// Decides whether `request` is a valid, live authentication. Checks run
/// in order: ancestry, issuer trust, use count, liveness of the new token,
/// then the stored proof; the first failure is reported.
pub fn verify_request(verifier: &Verifier, request: Txid, source: &dyn ChainSource, store: &ProofStore) -> Verdict {
    run(verifier, request, source, store).unwrap_or_else(Verdict::Reject)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TokenState {
    Active,
    /// Live token but every permitted use has been made.
    Exhausted,
    Revoked { txid: Txid, signer: u8 },
}

/// Identity state reconstructed by walking forward from its publish.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityStatus {
    pub publish: Txid,
    pub issuer: Address,
    pub user: Address,
    pub limit: u32,
    pub uses: u32,
    /// Request transactions in order, with the kind of each.
    pub hops: Vec<(Txid, SpendKind)>,
    pub token: OutPoint,
    pub value: u64,
    #[serde(flatten)]
    pub state: TokenState,
}

pub fn identity_status(source: &dyn ChainSource, publish: Txid) -> Result<Option<IdentityStatus>, SourceError> {
    let Some(tx) = source.transaction(&publish)? else { return Ok(None) };
    let Some(info) = parse_publish(&tx.tx) else { return Ok(None) };
    let mut token = OutPoint::new(publish, 1);
    let mut value = info.value;
    let mut hops = Vec::new();
    let state = loop {
        let Some(spender) = source.spender(&token)? else {
            break if hops.len() as u32 >= info.uses as u32 { TokenState::Exhausted } else { TokenState::Active };
        };
        let kind = classify_sourced(source, &spender)?;
        let input = spender.tx.inputs.iter().position(|i| i.outpoint == token).unwrap_or(0);
        match token_output(kind, input) {
            Some(vout) => {
                hops.push((spender.txid, kind));
                token = OutPoint::new(spender.txid, vout);
                value = spender.tx.outputs[vout as usize].value;
            }
            None => break TokenState::Revoked { txid: spender.txid, signer: spender.tx.inputs[input].signer },
        }
    };
    Ok(Some(IdentityStatus {
        publish,
        issuer: info.issuer,
        user: info.user,
        limit: info.uses as u32,
        uses: hops.len() as u32,
        hops,
        token,
        value,
        state,
    }))
}
