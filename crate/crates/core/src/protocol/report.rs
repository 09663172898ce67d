//! Public history of an address: authentications it made and whether
//! providers acknowledged them.

use serde::Serialize;

use crate::group::Secp256k1;
use crate::ledger::{Address, OutPoint, Script, Transaction, Txid};
use crate::schnorr::verify_encoded;
use crate::KeyPair;

use super::shape::{parse_publish, SpendKind};
use super::source::{ChainSource, SourceError};
use super::verify::{classify_sourced, identity_status};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub publish: Txid,
    pub request: Txid,
    pub accept: Option<Txid>,
    pub sp: Address,
    pub issuer: Address,
}

fn token_issuers(tx: &Transaction) -> Vec<Address> {
    tx.outputs
        .iter()
        .filter_map(|o| match &o.script {
            Script::Multisig1of2 { keys } => Some(keys[1]),
            _ => None,
        })
        .collect()
}

/// The spender of a request's provider payment, if it pays only issuers of
/// the request's tokens.
fn acceptance(source: &dyn ChainSource, request: &Txid, tx: &Transaction) -> Result<Option<Txid>, SourceError> {
    let issuers = token_issuers(tx);
    let Some(spender) = source.spender(&OutPoint::new(*request, 0))? else { return Ok(None) };
    let pays_issuers = !spender.tx.outputs.is_empty()
        && spender.tx.outputs.iter().all(|o| o.script.address().is_some_and(|a| issuers.contains(&a)));
    Ok(pays_issuers.then_some(spender.txid))
}

/// Every request hop of every identity published to `user`, with the
/// acknowledging transaction when there is one.
pub fn reputation_report(user: Address, source: &dyn ChainSource) -> Result<Vec<ReportRow>, SourceError> {
    let mut rows = Vec::new();
    for publish in source.paying(&Script::pay_to(user))? {
        if parse_publish(&publish.tx).is_none_or(|info| info.user != user) {
            continue;
        }
        let Some(status) = identity_status(source, publish.txid)? else { continue };
        for (request, _) in &status.hops {
            let tx = source.transaction(request)?.expect("hop was returned by this source");
            rows.push(ReportRow {
                publish: publish.txid,
                request: *request,
                accept: acceptance(source, request, &tx.tx)?,
                sp: tx.tx.outputs[0].script.address().expect("request shape pays an address"),
                issuer: status.issuer,
            });
        }
    }
    Ok(rows)
}

const CHALLENGE_DOMAIN: &[u8] = b"chainid/lightweight/v1";

fn challenge_message(challenge: &[u8]) -> Vec<u8> {
    let mut m = CHALLENGE_DOMAIN.to_vec();
    m.extend_from_slice(challenge);
    m
}

/// Proof of control over an address, offered together with the requests
/// it made.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlClaim {
    #[serde(with = "crate::hash::hex_bytes")]
    pub public_key: Vec<u8>,
    #[serde(with = "crate::hash::hex_bytes")]
    pub signature: Vec<u8>,
    pub txids: Vec<Txid>,
}

impl ControlClaim {
    pub fn sign(key: &KeyPair, challenge: &[u8], txids: Vec<Txid>) -> Self {
        ControlClaim {
            public_key: key.public_bytes(),
            signature: key.sign(&challenge_message(challenge)).to_bytes(),
            txids,
        }
    }

    pub fn address(&self) -> Address {
        Address::from_public_key(&self.public_key)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum LightweightRejection {
    NoClaims,
    BadSignature { claim: usize },
    UnknownTxid { txid: Txid },
    NotOwned { txid: Txid },
    NotAccepted { txid: Txid },
    Source(SourceError),
}

impl LightweightRejection {
    pub fn name(&self) -> &'static str {
        match self {
            LightweightRejection::NoClaims => "no_claims",
            LightweightRejection::BadSignature { .. } => "bad_signature",
            LightweightRejection::UnknownTxid { .. } => "unknown_txid",
            LightweightRejection::NotOwned { .. } => "not_owned",
            LightweightRejection::NotAccepted { .. } => "not_accepted",
            LightweightRejection::Source(_) => "source_error",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LightweightVerdict {
    pub accepted: bool,
    pub addresses: Vec<Address>,
    /// Several addresses were shown together. Holders of different keys
    /// can pool them, so this only shows joint control, not one owner.
    pub weak_linkage: bool,
    pub rejection: Option<LightweightRejection>,
}

fn check_claims(challenge: &[u8], claims: &[ControlClaim], source: &dyn ChainSource) -> Result<(), LightweightRejection> {
    if claims.is_empty() {
        return Err(LightweightRejection::NoClaims);
    }
    let message = challenge_message(challenge);
    for (i, claim) in claims.iter().enumerate() {
        if !verify_encoded::<Secp256k1>(&claim.public_key, &claim.signature, &message) {
            return Err(LightweightRejection::BadSignature { claim: i });
        }
    }
    for claim in claims {
        for txid in &claim.txids {
            let tx = source
                .transaction(txid)
                .map_err(LightweightRejection::Source)?
                .ok_or(LightweightRejection::UnknownTxid { txid: *txid })?;
            let kind = classify_sourced(source, &tx).map_err(LightweightRejection::Source)?;
            let owned = kind != SpendKind::Revoke && tx.tx.inputs.iter().any(|i| i.public_key == claim.public_key);
            if !owned {
                return Err(LightweightRejection::NotOwned { txid: *txid });
            }
            if acceptance(source, txid, &tx.tx).map_err(LightweightRejection::Source)?.is_none() {
                return Err(LightweightRejection::NotAccepted { txid: *txid });
            }
        }
    }
    Ok(())
}

/// Accepts iff every claim's signature over `challenge` verifies and every
/// claimed transaction is a request signed by that key and acknowledged on
/// chain.
pub fn lightweight_verify(challenge: &[u8], claims: &[ControlClaim], source: &dyn ChainSource) -> LightweightVerdict {
    let mut addresses: Vec<Address> = claims.iter().map(ControlClaim::address).collect();
    addresses.dedup();
    let result = check_claims(challenge, claims, source);
    LightweightVerdict {
        accepted: result.is_ok(),
        weak_linkage: addresses.len() > 1,
        addresses,
        rejection: result.err(),
    }
}
